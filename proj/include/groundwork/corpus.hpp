#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "groundwork/error.hpp"

namespace groundwork {

struct DocumentSource {
    std::string doc_id;
    std::string title;
    std::string publisher;
    std::vector<std::string> section_path;
    std::optional<int> page;
    std::optional<std::string> uri;

    friend bool operator==(const DocumentSource&, const DocumentSource&) = default;
};

struct Document {
    DocumentSource source;
    std::string text;

    friend bool operator==(const Document&, const Document&) = default;
};

/// Half-open token range [begin, end) within the owning document.
struct TokenSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct Chunk {
    std::string chunk_id;
    DocumentSource source;
    std::string text;
    TokenSpan token_span;
    std::size_t ordinal = 0;
};

struct ChunkConfig {
    std::size_t max_tokens = 100;
    std::size_t overlap_tokens = 20;

    void validate() const;
};

class CorpusError : public Error {
public:
    /// line is 1-based; 0 when the error is not tied to a line.
    CorpusError(const std::string& message, std::size_t line = 0);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A token keeps its byte range in the source text so chunks can be cut
/// from the original string without re-spacing it.
struct Token {
    std::string_view text;
    std::size_t offset = 0;
};

/// Tokens are maximal runs of alphanumeric characters, or single
/// non-space punctuation characters. Bytes >= 0x80 (UTF-8 multibyte
/// sequences) count as alphanumeric so non-ASCII words stay intact.
std::vector<Token> tokenize_with_offsets(std::string_view text);
std::vector<std::string> tokenize(std::string_view text);

inline bool is_word_byte(unsigned char c) noexcept {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           c >= 0x80;
}

/// Sentence segmentation: a sentence ends at '.', '!' or '?' followed by
/// whitespace or end of text, and at every line break. Segments are trimmed
/// and empty ones dropped. Abbreviations are not special-cased.
std::vector<std::string> split_sentences(std::string_view text);

/// Capitalised opening and terminal punctuation. Token windows cut
/// sentences; the cut halves fail this test.
bool is_complete_sentence(std::string_view sentence) noexcept;

/// Closed list of English function words; expects a lowercased token.
bool is_stopword(std::string_view lowered) noexcept;

/// Splits a document into overlapping windows of at most cfg.max_tokens
/// tokens, with stride max_tokens - overlap_tokens. The last window may be
/// short. Throws CorpusError("empty document") when the text has no tokens.
std::vector<Chunk> chunk_document(const Document& doc, const ChunkConfig& cfg);
std::vector<Chunk> chunk_corpus(const std::vector<Document>& docs, const ChunkConfig& cfg);

/// Newline-delimited JSON records: doc_id, title, publisher, text required;
/// section_path, page, uri optional. Blank lines are skipped.
std::vector<Document> parse_corpus(std::istream& in);
std::vector<Document> parse_corpus(std::string_view text);
std::vector<Document> load_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const std::vector<Document>& docs);

}  // namespace groundwork
