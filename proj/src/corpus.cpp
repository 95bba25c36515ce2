#include "groundwork/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "groundwork/serialize.hpp"

namespace groundwork {

CorpusError::CorpusError(const std::string& message, std::size_t line)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

void ChunkConfig::validate() const {
    if (max_tokens == 0) throw CorpusError("max_tokens must be positive");
    if (overlap_tokens >= max_tokens) throw CorpusError("overlap_tokens must be < max_tokens");
}

std::vector<Token> tokenize_with_offsets(std::string_view text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_word_byte(c)) {
            std::size_t j = i + 1;
            while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
            tokens.push_back({text.substr(i, j - i), i});
            i = j;
        } else if (c == ' ' || (c >= '\t' && c <= '\r')) {
            ++i;
        } else {
            tokens.push_back({text.substr(i, 1), i});
            ++i;
        }
    }
    return tokens;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& t : tokenize_with_offsets(text)) out.emplace_back(t.text);
    return out;
}

namespace {

bool is_space(unsigned char c) noexcept { return c == ' ' || (c >= '\t' && c <= '\r'); }

void push_trimmed(std::vector<std::string>& out, std::string_view segment) {
    std::size_t b = 0;
    std::size_t e = segment.size();
    while (b < e && is_space(static_cast<unsigned char>(segment[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(segment[e - 1]))) --e;
    if (e > b) out.emplace_back(segment.substr(b, e - b));
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '\n' || c == '\r') {
            push_trimmed(out, text.substr(start, i - start));
            start = i + 1;
        } else if ((c == '.' || c == '!' || c == '?') &&
                   (i + 1 == text.size() || is_space(static_cast<unsigned char>(text[i + 1])))) {
            push_trimmed(out, text.substr(start, i + 1 - start));
            start = i + 1;
        }
    }
    push_trimmed(out, text.substr(start));
    return out;
}

namespace {
constexpr std::array<std::string_view, 60> kStopwords = {
    "a",    "about", "after", "all",   "an",    "and",   "any",  "are",  "as",    "at",    "be",    "before",
    "by",   "can",   "do",    "does",  "for",   "from",  "has",  "have", "how",   "i",     "if",    "in",
    "into", "is",    "it",    "its",   "may",   "me",    "my",   "no",   "not",   "of",    "on",    "or",
    "our",  "should", "so",   "than",  "that",  "the",   "their", "them", "then", "there", "these", "they",
    "this", "to",    "up",    "was",   "we",    "what",  "when", "which", "while", "with", "you",   "your"};

}  // namespace

bool is_stopword(std::string_view w) noexcept {
    return std::binary_search(kStopwords.begin(), kStopwords.end(), w);
}

bool is_complete_sentence(std::string_view s) noexcept {
    if (s.empty()) return false;
    const char first = s.front();
    const char last = s.back();
    return ((first >= 'A' && first <= 'Z') || (first >= '0' && first <= '9')) &&
           (last == '.' || last == '!' || last == '?');
}

std::vector<Chunk> chunk_document(const Document& doc, const ChunkConfig& cfg) {
    cfg.validate();
    const auto tokens = tokenize_with_offsets(doc.text);
    if (tokens.empty()) throw CorpusError("empty document: " + doc.source.doc_id);

    const std::size_t n = tokens.size();
    const std::size_t stride = cfg.max_tokens - cfg.overlap_tokens;
    std::vector<Chunk> chunks;
    for (std::size_t begin = 0;; begin += stride) {
        const std::size_t end = std::min(begin + cfg.max_tokens, n);
        const auto& first = tokens[begin];
        const auto& last = tokens[end - 1];
        const std::size_t byte_begin = first.offset;
        const std::size_t byte_end = last.offset + last.text.size();

        Chunk chunk;
        chunk.ordinal = chunks.size();
        chunk.chunk_id = doc.source.doc_id + "#" + std::to_string(chunk.ordinal);
        chunk.source = doc.source;
        chunk.text = doc.text.substr(byte_begin, byte_end - byte_begin);
        chunk.token_span = {begin, end};
        chunks.push_back(std::move(chunk));
        if (end == n) break;
    }
    return chunks;
}

std::vector<Chunk> chunk_corpus(const std::vector<Document>& docs, const ChunkConfig& cfg) {
    std::vector<Chunk> all;
    for (const auto& doc : docs) {
        auto chunks = chunk_document(doc, cfg);
        all.insert(all.end(), std::make_move_iterator(chunks.begin()),
                   std::make_move_iterator(chunks.end()));
    }
    return all;
}

Json source_to_json(const DocumentSource& source) {
    Json j = {{"doc_id", source.doc_id},
              {"title", source.title},
              {"publisher", source.publisher},
              {"section_path", source.section_path}};
    if (source.page) j["page"] = *source.page;
    if (source.uri) j["uri"] = *source.uri;
    return j;
}

namespace {

const Json& require(const Json& j, const char* field, Json::value_t type, std::size_t line) {
    auto it = j.find(field);
    if (it == j.end()) throw CorpusError(std::string("missing field \"") + field + "\"", line);
    if (it->type() != type) throw CorpusError(std::string("field \"") + field + "\" has wrong type", line);
    return *it;
}

DocumentSource parse_source(const Json& j, std::size_t line) {
    if (!j.is_object()) throw CorpusError("record is not an object", line);
    DocumentSource s;
    s.doc_id = require(j, "doc_id", Json::value_t::string, line).get<std::string>();
    s.title = require(j, "title", Json::value_t::string, line).get<std::string>();
    s.publisher = require(j, "publisher", Json::value_t::string, line).get<std::string>();
    if (s.doc_id.empty()) throw CorpusError("doc_id is empty", line);
    if (s.title.empty()) throw CorpusError("title is empty", line);
    if (auto it = j.find("section_path"); it != j.end() && !it->is_null()) {
        if (!it->is_array()) throw CorpusError("field \"section_path\" has wrong type", line);
        for (const auto& part : *it) {
            if (!part.is_string()) throw CorpusError("field \"section_path\" has wrong type", line);
            s.section_path.push_back(part.get<std::string>());
        }
    }
    if (auto it = j.find("page"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer()) throw CorpusError("field \"page\" has wrong type", line);
        s.page = it->get<int>();
    }
    if (auto it = j.find("uri"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw CorpusError("field \"uri\" has wrong type", line);
        s.uri = it->get<std::string>();
    }
    return s;
}

bool is_blank(std::string_view s) {
    for (unsigned char c : s) {
        if (!is_space(c)) return false;
    }
    return true;
}

}  // namespace

DocumentSource source_from_json(const Json& j) { return parse_source(j, 0); }

std::vector<Document> parse_corpus(std::istream& in) {
    std::vector<Document> docs;
    std::unordered_set<std::string> seen;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (is_blank(raw)) continue;
        Json j;
        try {
            j = Json::parse(raw);
        } catch (const Json::parse_error& e) {
            throw CorpusError(std::string("malformed record: ") + e.what(), line);
        }
        Document doc;
        doc.source = parse_source(j, line);
        doc.text = require(j, "text", Json::value_t::string, line).get<std::string>();
        if (is_blank(doc.text)) {
            throw CorpusError("text is empty", line);
        }
        if (!seen.insert(doc.source.doc_id).second) {
            throw CorpusError("duplicate doc_id \"" + doc.source.doc_id + "\"", line);
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<Document> parse_corpus(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_corpus(in);
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot open corpus file " + path.string());
    return parse_corpus(in);
}

void write_corpus(std::ostream& out, const std::vector<Document>& docs) {
    for (const auto& doc : docs) {
        Json j = source_to_json(doc.source);
        j["text"] = doc.text;
        out << j.dump() << '\n';
    }
}

}  // namespace groundwork
