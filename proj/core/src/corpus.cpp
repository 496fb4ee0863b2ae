#include "ragcal/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <set>

#include <unistd.h>

#include "ragcal/errors.hpp"

namespace ragcal {
namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c) != 0; }

std::vector<Token> builtin_tokenize(std::string_view text) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_space(c)) {
            ++i;
        } else if (is_punct(c)) {
            tokens.push_back({i, i + 1});
            ++i;
        } else {
            const std::size_t start = i;
            while (i < n) {
                const auto d = static_cast<unsigned char>(text[i]);
                if (is_space(d) || is_punct(d)) break;
                ++i;
            }
            tokens.push_back({start, i});
        }
    }
    return tokens;
}

std::vector<std::string> run_external_tokenizer(std::string_view text, const std::string& command) {
    if (trim(command).empty()) throw ConfigError("external tokenizer selected but no command configured");

    char tmpl[] = "/tmp/ragcal-tok-XXXXXX";
    const int fd = mkstemp(tmpl);
    if (fd < 0) throw Error("cannot create temp file for external tokenizer");
    const std::string tmp_path = tmpl;
    {
        std::size_t off = 0;
        while (off < text.size()) {
            const ssize_t w = ::write(fd, text.data() + off, text.size() - off);
            if (w <= 0) {
                ::close(fd);
                std::remove(tmp_path.c_str());
                throw Error("short write to tokenizer temp file");
            }
            off += static_cast<std::size_t>(w);
        }
        ::close(fd);
    }

    const std::string full = command + " < '" + tmp_path + "'";
    FILE* pipe = ::popen(full.c_str(), "r");
    if (pipe == nullptr) {
        std::remove(tmp_path.c_str());
        throw ConfigError("external tokenizer unavailable: " + command);
    }
    std::string output;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof(buf), pipe)) > 0) output.append(buf, got);
    const int status = ::pclose(pipe);
    std::remove(tmp_path.c_str());
    if (status != 0) {
        throw ConfigError("external tokenizer unavailable or failed (status " + std::to_string(status) +
                          "): " + command);
    }
    std::vector<std::string> tokens;
    for (auto& line : split_lines(output)) {
        if (!line.empty()) tokens.push_back(std::move(line));
    }
    return tokens;
}

std::string normalize_newlines(std::string text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\r') {
            out.push_back('\n');
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        } else {
            out.push_back(text[i]);
        }
    }
    return out;
}

bool is_corpus_file(const std::filesystem::path& p) {
    static const std::set<std::string> kExt = {".txt", ".md", ".markdown", ".text", ".pdf"};
    return kExt.count(to_lower(p.extension().string())) > 0;
}

}  // namespace

std::vector<Token> tokenize(std::string_view text, const TokenizerSpec& spec) {
    if (spec.kind == TokenizerKind::builtin) return builtin_tokenize(text);

    // Align the external tokens back onto the text to recover byte offsets.
    std::vector<Token> tokens;
    std::size_t cursor = 0;
    for (const auto& tok : run_external_tokenizer(text, spec.command)) {
        const std::size_t at = text.find(tok, cursor);
        if (at == std::string_view::npos) {
            throw ProtocolError("external tokenizer emitted a token not found in order in the text: '" + tok + "'");
        }
        tokens.push_back({at, at + tok.size()});
        cursor = at + tok.size();
    }
    return tokens;
}

std::size_t count_tokens(std::string_view text, const TokenizerSpec& spec) {
    if (spec.kind == TokenizerKind::builtin) return builtin_tokenize(text).size();
    return run_external_tokenizer(text, spec.command).size();
}

void ChunkingConfig::validate() const {
    if (max_chunk_tokens == 0) throw ConfigError("max_chunk_tokens must be positive");
    if (overlap_tokens >= max_chunk_tokens) {
        throw ConfigError("overlap_tokens (" + std::to_string(overlap_tokens) + ") must be < max_chunk_tokens (" +
                          std::to_string(max_chunk_tokens) + ")");
    }
    if (tokenizer.kind == TokenizerKind::external_command && trim(tokenizer.command).empty()) {
        throw ConfigError("external tokenizer selected but no command configured");
    }
}

std::string make_chunk_id(std::string_view doc_id, std::size_t start_token) {
    std::string id(doc_id);
    id.push_back(':');
    id += std::to_string(start_token);
    return id;
}

std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& cfg) {
    cfg.validate();
    const auto tokens = tokenize(doc.text, cfg.tokenizer);
    const std::size_t n = tokens.size();
    const std::size_t stride = cfg.stride();

    std::vector<Chunk> chunks;
    for (std::size_t start = 0; start < n; start += stride) {
        const std::size_t end = std::min(start + cfg.max_chunk_tokens, n);
        Chunk c;
        c.chunk_id = make_chunk_id(doc.doc_id, start);
        c.doc_id = doc.doc_id;
        c.token_span = {start, end};
        c.char_span = {tokens[start].begin, tokens[end - 1].end};
        c.text = doc.text.substr(c.char_span.begin, c.char_span.length());
        chunks.push_back(std::move(c));
        if (end == n) break;
    }
    return chunks;
}

Corpus::Corpus(std::vector<Document> documents, std::vector<Chunk> chunks, std::vector<FileError> errors)
    : documents_(std::move(documents)), chunks_(std::move(chunks)), errors_(std::move(errors)) {
    by_id_.reserve(chunks_.size());
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
        if (!by_id_.emplace(chunks_[i].chunk_id, i).second) {
            throw InvalidArgument("duplicate chunk_id " + chunks_[i].chunk_id);
        }
    }
}

const Chunk* Corpus::find_chunk(std::string_view chunk_id) const {
    auto it = by_id_.find(std::string(chunk_id));
    return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

std::vector<const Chunk*> Corpus::chunks_of(std::string_view doc_id) const {
    std::vector<const Chunk*> out;
    for (const auto& c : chunks_) {
        if (c.doc_id == doc_id) out.push_back(&c);
    }
    std::sort(out.begin(), out.end(),
              [](const Chunk* a, const Chunk* b) { return a->token_span.begin < b->token_span.begin; });
    return out;
}

Document load_document(const std::filesystem::path& path, const TokenizerSpec& tokenizer) {
    Document doc;
    doc.doc_id = path.lexically_normal().generic_string();
    doc.source_path = path.generic_string();
    std::string raw = read_file(path);
    if (to_lower(path.extension().string()) == ".pdf") {
        doc.text = extract_pdf_text(raw);
        doc.warnings.push_back("pdf text extraction: layout flattened to lines");
    } else {
        doc.text = std::move(raw);
    }
    doc.text = normalize_newlines(std::move(doc.text));
    if (trim(doc.text).empty()) throw Error("document is empty after whitespace normalization");
    doc.token_count = count_tokens(doc.text, tokenizer);
    return doc;
}

Corpus load_corpus(const std::vector<std::filesystem::path>& paths, const ChunkingConfig& cfg) {
    cfg.validate();
    std::vector<std::filesystem::path> files;
    std::vector<FileError> errors;
    for (const auto& p : paths) {
        std::error_code ec;
        if (std::filesystem::is_directory(p, ec)) {
            for (auto it = std::filesystem::recursive_directory_iterator(p, ec);
                 !ec && it != std::filesystem::recursive_directory_iterator(); it.increment(ec)) {
                if (it->is_regular_file(ec) && is_corpus_file(it->path())) files.push_back(it->path());
            }
            if (ec) errors.push_back({p.generic_string(), ec.message()});
        } else {
            files.push_back(p);
        }
    }
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.generic_string() < b.generic_string(); });
    files.erase(std::unique(files.begin(), files.end()), files.end());

    std::vector<Document> docs;
    std::vector<Chunk> chunks;
    for (const auto& f : files) {
        try {
            Document doc = load_document(f, cfg.tokenizer);
            auto doc_chunks = chunk_document(doc, cfg);
            chunks.insert(chunks.end(), std::make_move_iterator(doc_chunks.begin()),
                          std::make_move_iterator(doc_chunks.end()));
            docs.push_back(std::move(doc));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            errors.push_back({f.generic_string(), e.what()});
        }
    }
    if (docs.empty()) throw PipelineError("empty corpus");
    return Corpus(std::move(docs), std::move(chunks), std::move(errors));
}

json chunk_to_json(const Chunk& c) {
    return json{{"chunk_id", c.chunk_id},
                {"doc_id", c.doc_id},
                {"token_span", {c.token_span.begin, c.token_span.end}},
                {"char_span", {c.char_span.begin, c.char_span.end}},
                {"text", c.text}};
}

Chunk chunk_from_json(const json& j) {
    Chunk c;
    c.chunk_id = j.at("chunk_id").get<std::string>();
    c.doc_id = j.at("doc_id").get<std::string>();
    c.token_span = {j.at("token_span").at(0).get<std::size_t>(), j.at("token_span").at(1).get<std::size_t>()};
    c.char_span = {j.at("char_span").at(0).get<std::size_t>(), j.at("char_span").at(1).get<std::size_t>()};
    c.text = j.at("text").get<std::string>();
    return c;
}

json document_to_json(const Document& d) {
    return json{{"doc_id", d.doc_id},
                {"source_path", d.source_path},
                {"token_count", d.token_count},
                {"warnings", d.warnings}};
}

std::string chunk_manifest_jsonl(const Corpus& corpus) {
    std::vector<json> rows;
    rows.reserve(corpus.chunks().size());
    for (const auto& c : corpus.chunks()) rows.push_back(chunk_to_json(c));
    return to_jsonl(rows);
}

Corpus corpus_from_manifest(const std::filesystem::path& manifest) {
    std::vector<Chunk> chunks;
    std::vector<Document> docs;
    std::set<std::string> seen;
    for (const auto& row : read_jsonl(manifest)) {
        Chunk c = chunk_from_json(row);
        if (seen.insert(c.doc_id).second) {
            Document d;
            d.doc_id = c.doc_id;
            d.source_path = manifest.generic_string();
            docs.push_back(std::move(d));
        }
        chunks.push_back(std::move(c));
    }
    if (chunks.empty()) throw PipelineError("empty corpus");
    return Corpus(std::move(docs), std::move(chunks), {});
}

}  // namespace ragcal
