#include "groundwork/cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>

#include <CLI11.hpp>

#include "groundwork/evalharness.hpp"
#include "groundwork/service.hpp"

namespace groundwork {

namespace fs = std::filesystem;

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

struct Options {
    std::string state_dir = ".groundwork";
    std::string config_path;
    std::string format = "text";

    std::string corpus_path;
    std::optional<std::uint64_t> seed;
    std::string k_range;

    std::string query;
    std::string strategy = "collapsed";
    std::size_t k = kDefaultRetrievalK;

    std::string bench_path;
    std::string judge = "rule";

    std::string host = "127.0.0.1";
    int port = 8080;
};

fs::path corpus_file(const Options& o) { return fs::path(o.state_dir) / "corpus.jsonl"; }
fs::path tree_file(const Options& o) { return fs::path(o.state_dir) / "tree.jsonl"; }

RuntimeConfig load_config(const Options& o) {
    Json j = Json::object();
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw Error("cannot open config " + o.config_path);
        try {
            j = Json::parse(in);
        } catch (const Json::parse_error& e) {
            throw Error("config is not JSON: " + std::string(e.what()));
        }
    }
    return runtime_config_from_json(j, process_env());
}

std::pair<std::size_t, std::size_t> parse_k_range(const std::string& text) {
    const auto comma = text.find(',');
    try {
        if (comma == std::string::npos) throw std::invalid_argument("comma");
        std::size_t used = 0;
        const long lo = std::stol(text.substr(0, comma), &used);
        if (used != comma) throw std::invalid_argument("lo");
        const std::string rest = text.substr(comma + 1);
        const long hi = std::stol(rest, &used);
        if (used != rest.size()) throw std::invalid_argument("hi");
        if (lo < 1 || hi < lo) throw std::invalid_argument("order");
        return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
    } catch (const std::logic_error&) {
        throw UsageError("--k-range expects a,b with 1 <= a <= b, got \"" + text + "\"");
    }
}

std::unique_ptr<Service> loaded_service(const Options& o, bool need_tree) {
    auto svc = std::make_unique<Service>(load_config(o));
    if (fs::exists(corpus_file(o))) svc->ingest(load_corpus(corpus_file(o)));
    if (fs::exists(tree_file(o))) {
        svc->install_tree(std::make_shared<const RaptorTree>(RaptorTree::load(tree_file(o))));
    } else if (need_tree) {
        throw Error("no knowledge base in " + o.state_dir + "; run ingest and build first");
    }
    return svc;
}

std::string describe(const DocumentSource& s) {
    std::string out = s.publisher + ", " + s.title;
    if (!s.section_path.empty()) {
        out += ", ";
        for (std::size_t i = 0; i < s.section_path.size(); ++i) out += (i ? " > " : "") + s.section_path[i];
    }
    if (s.page) out += ", p. " + std::to_string(*s.page);
    return out;
}

void print_answer(std::ostream& out, const Answer& a) {
    out << a.text << "\n\n";
    char overall[32];
    std::snprintf(overall, sizeof overall, "%.3f", a.grounding.overall);
    out << "verdict: " << to_string(a.grounding.verdict) << " (support " << overall << ")";
    if (a.low_confidence) out << " [low confidence]";
    out << "\n";
    if (!a.citations.empty()) {
        out << "sources:\n";
        for (std::size_t i = 0; i < a.citations.size(); ++i) {
            out << "  [" << i + 1 << "] " << describe(a.citations[i].source) << " (" << a.citations[i].node_id << ")\n";
        }
    }
    out << "tools:";
    for (const auto& t : a.tool_trace) out << ' ' << t.tool << '(' << t.status << ')';
    out << '\n';
}

int cmd_ingest(const Options& o, std::ostream& out) {
    auto docs = load_corpus(o.corpus_path);
    Service svc(load_config(o));
    const Json result = svc.ingest(docs);
    fs::create_directories(o.state_dir);
    std::ofstream f(corpus_file(o));
    write_corpus(f, docs);
    if (!f) throw Error("cannot write " + corpus_file(o).string());
    fs::remove(tree_file(o));
    if (o.format == "records") {
        out << result.dump() << '\n';
    } else {
        out << "ingested " << result["doc_count"] << " documents (" << result["chunk_count"] << " chunks)\n";
    }
    return kExitOk;
}

int cmd_build(const Options& o, std::ostream& out) {
    Json overrides = Json::object();
    if (o.seed) overrides["seed"] = *o.seed;
    if (!o.k_range.empty()) {
        const auto [lo, hi] = parse_k_range(o.k_range);
        overrides["k_min"] = lo;
        overrides["k_max"] = hi;
    }
    if (!fs::exists(corpus_file(o))) throw Error("no corpus in " + o.state_dir + "; run ingest first");
    auto svc = loaded_service(o, false);
    const Json result = svc->build(overrides);
    svc->active_tree()->save(tree_file(o));
    if (o.format == "records") {
        out << result.dump() << '\n';
    } else {
        out << "levels:";
        for (const auto& n : result["levels"]) out << ' ' << n.get<std::size_t>();
        out << "\nnodes: " << result["node_count"] << "\ndigest: " << result["digest"].get<std::string>()
            << "\nbuild_ms: " << result["build_ms"] << '\n';
    }
    return kExitOk;
}

int cmd_query(const Options& o, std::ostream& out) {
    auto svc = loaded_service(o, true);
    const Answer a = svc->query("cli", o.query, {o.k, o.strategy});
    if (o.format == "records") {
        out << answer_to_json(a).dump() << '\n';
    } else {
        print_answer(out, a);
    }
    return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
    const RuntimeConfig cfg = load_config(o);
    auto svc = loaded_service(o, true);
    const auto tree = svc->active_tree();
    const auto items = load_benchmark(o.bench_path, load_corpus(corpus_file(o)));

    std::unique_ptr<Judge> judge;
    if (o.judge == "remote") {
        if (!cfg.judge_endpoint) throw Error("remote judge selected but no judge endpoint is configured");
        judge = std::make_unique<RemoteJudge>(*cfg.judge_endpoint);
    } else {
        judge = std::make_unique<RuleJudge>(svc->embedder());
    }
    std::size_t counter = 0;
    NamedSystem assistant{"groundwork assistant", [&](const EvalItem& item) {
                              return svc->query("eval-" + std::to_string(++counter), item.question);
                          }};
    const auto report = run_benchmark(items, {assistant, {"no-retrieval baseline", no_retrieval_baseline()}},
                                      *judge, [&](const EvalItem& item) {
                                          Evidence ev = context_leaves(*tree, item);
                                          return ev;
                                      });
    if (o.format == "records") {
        write_records(out, report);
    } else {
        out << render_table(report);
        for (const auto& r : report.records) {
            if (r.error) out << "failed: " << r.system << " item " << r.item_index << ": " << *r.error << '\n';
        }
    }
    return kExitOk;
}

int cmd_serve(const Options& o, std::ostream& out) {
    auto svc = loaded_service(o, false);
    out << "listening on http://" << o.host << ':' << o.port << std::endl;
    svc->listen(o.host, o.port);
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Grounded emergency-guidance assistant over a hierarchical document index.", "groundwork"};
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--state-dir", o.state_dir, "Directory holding the ingested corpus and built tree");
    app.add_option("--config", o.config_path, "JSON configuration file");
    app.add_option("--format", o.format, "Output format")->check(CLI::IsMember({"text", "records"}));

    auto* ingest = app.add_subcommand("ingest", "Load a JSONL corpus into the state directory");
    ingest->add_option("path", o.corpus_path, "Corpus file")->required();

    auto* build = app.add_subcommand("build", "Build the retrieval tree from the ingested corpus");
    build->add_option("--seed", o.seed, "Build seed");
    build->add_option("--k-range", o.k_range, "Cluster-count search range a,b");

    auto* query = app.add_subcommand("query", "Ask a question");
    query->add_option("text", o.query, "Question")->required();
    query->add_option("--strategy", o.strategy, "Retrieval strategy")->check(CLI::IsMember({"collapsed", "traverse"}));
    query->add_option("--k", o.k, "Number of retrieved nodes")->check(CLI::PositiveNumber);

    auto* eval = app.add_subcommand("eval", "Score the assistant on a benchmark file");
    eval->add_option("path", o.bench_path, "Benchmark file")->required();
    eval->add_option("--judge", o.judge, "Judge")->check(CLI::IsMember({"rule", "remote"}));

    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    serve->add_option("--port", o.port, "Port")->check(CLI::Range(1, 65535));
    serve->add_option("--host", o.host, "Bind address");

    std::vector<std::string> argv_store{"groundwork"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n' << "run with --help for usage\n";
        return kExitUsage;
    }

    try {
        if (*ingest) return cmd_ingest(o, out);
        if (*build) return cmd_build(o, out);
        if (*query) return cmd_query(o, out);
        if (*eval) return cmd_eval(o, out);
        return cmd_serve(o, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace groundwork
