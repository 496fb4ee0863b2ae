#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ragcal/util.hpp"

namespace ragcal {

enum class TokenizerKind { builtin, external_command };

/// Which tokenizer defines token boundaries. The builtin one splits on
/// whitespace runs and emits every ASCII punctuation character as its own
/// token. The external one runs `command` with the text on stdin and reads
/// one token per output line.
struct TokenizerSpec {
    TokenizerKind kind = TokenizerKind::builtin;
    std::string command;
};

/// Half-open byte range [begin, end) into a document's UTF-8 text.
struct Token {
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t length() const noexcept { return end - begin; }
    friend bool operator==(const Span&, const Span&) = default;
};

std::vector<Token> tokenize(std::string_view text, const TokenizerSpec& spec = {});
std::size_t count_tokens(std::string_view text, const TokenizerSpec& spec = {});

struct ChunkingConfig {
    std::size_t max_chunk_tokens = 800;
    std::size_t overlap_tokens = 400;
    TokenizerSpec tokenizer;

    /// Throws ConfigError unless 0 <= overlap < max and max > 0.
    void validate() const;
    std::size_t stride() const noexcept { return max_chunk_tokens - overlap_tokens; }
};

struct Document {
    std::string doc_id;
    std::string source_path;
    std::string text;
    std::size_t token_count = 0;
    /// Non-fatal notes, e.g. that PDF layout was flattened during extraction.
    std::vector<std::string> warnings;
};

struct Chunk {
    std::string chunk_id;  ///< doc_id ":" start-token index
    std::string doc_id;
    Span token_span;
    Span char_span;  ///< byte offsets into Document::text
    std::string text;
};

std::string make_chunk_id(std::string_view doc_id, std::size_t start_token);

/// Token windows of `max_chunk_tokens` starting every `stride()` tokens. The
/// first window that reaches the end of the document is the last one.
std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& cfg);

struct FileError {
    std::string path;
    std::string message;
};

class Corpus {
public:
    Corpus() = default;
    Corpus(std::vector<Document> documents, std::vector<Chunk> chunks, std::vector<FileError> errors);

    const std::vector<Document>& documents() const noexcept { return documents_; }
    const std::vector<Chunk>& chunks() const noexcept { return chunks_; }
    const std::vector<FileError>& errors() const noexcept { return errors_; }

    /// nullptr if no such chunk.
    const Chunk* find_chunk(std::string_view chunk_id) const;

    /// Chunks of one document in token order.
    std::vector<const Chunk*> chunks_of(std::string_view doc_id) const;

private:
    std::vector<Document> documents_;
    std::vector<Chunk> chunks_;
    std::vector<FileError> errors_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Reads one file into a Document. `.pdf` files go through best-effort text
/// extraction; everything else is read as UTF-8 text.
Document load_document(const std::filesystem::path& path, const TokenizerSpec& tokenizer = {});

/// Expands directories (recursively; .txt/.md/.markdown/.text/.pdf files),
/// sorts the resulting paths and chunks every readable document. Unreadable
/// files are recorded in Corpus::errors(); an empty result throws
/// PipelineError("empty corpus").
Corpus load_corpus(const std::vector<std::filesystem::path>& paths, const ChunkingConfig& cfg);

json chunk_to_json(const Chunk& chunk);
Chunk chunk_from_json(const json& j);
json document_to_json(const Document& doc);

/// JSON Lines, one object per chunk in corpus order.
std::string chunk_manifest_jsonl(const Corpus& corpus);

/// Rebuilds a corpus (chunks only, documents synthesized from chunk doc_ids)
/// from a manifest written by chunk_manifest_jsonl.
Corpus corpus_from_manifest(const std::filesystem::path& manifest);

/// Best-effort text from a PDF byte string: Flate-decoded content streams,
/// literal strings shown by text operators, one line per text block.
std::string extract_pdf_text(std::string_view pdf_bytes);

}  // namespace ragcal
