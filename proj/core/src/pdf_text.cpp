#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "ragcal/corpus.hpp"

namespace ragcal {
namespace {

std::string inflate_stream(std::string_view data) {
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) return {};
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    std::string out;
    char buf[16384];
    int rc;
    do {
        zs.next_out = reinterpret_cast<Bytef*>(buf);
        zs.avail_out = sizeof(buf);
        rc = inflate(&zs, Z_NO_FLUSH);
        out.append(buf, sizeof(buf) - zs.avail_out);
    } while (rc == Z_OK);
    inflateEnd(&zs);
    // Truncated streams still yield whatever decoded cleanly.
    return out;
}

// Reads a PDF literal string starting just after '('. Returns the decoded
// bytes and advances `i` past the closing ')'.
std::string read_literal(std::string_view s, std::size_t& i) {
    std::string out;
    int depth = 1;
    while (i < s.size()) {
        const char c = s[i++];
        if (c == '\\' && i < s.size()) {
            const char e = s[i++];
            switch (e) {
                case 'n': out.push_back('\n'); break;
                case 'r': out.push_back('\r'); break;
                case 't': out.push_back('\t'); break;
                case 'b': case 'f': break;
                case '\r': if (i < s.size() && s[i] == '\n') ++i; break;
                case '\n': break;
                default:
                    if (e >= '0' && e <= '7') {
                        int v = e - '0';
                        for (int k = 0; k < 2 && i < s.size() && s[i] >= '0' && s[i] <= '7'; ++k) v = v * 8 + (s[i++] - '0');
                        out.push_back(static_cast<char>(v));
                    } else {
                        out.push_back(e);
                    }
            }
        } else if (c == '(') {
            ++depth;
            out.push_back(c);
        } else if (c == ')') {
            if (--depth == 0) break;
            out.push_back(c);
        } else {
            out.push_back(c);
        }
    }
    return out;
}

bool is_delim(char c) {
    return c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '[' || c == ']' || c == '(' || c == ')' ||
           c == '<' || c == '>' || c == '/';
}

// Walks a content stream, keeping only text shown between BT and ET.
void extract_from_content(std::string_view s, std::string& out) {
    std::string line;
    bool in_text = false;
    std::vector<std::string> pending;  // strings waiting for their show operator
    std::size_t i = 0;
    auto flush_line = [&]() {
        const std::string t = trim(line);
        if (!t.empty()) {
            out += t;
            out.push_back('\n');
        }
        line.clear();
    };
    while (i < s.size()) {
        const char c = s[i];
        if (c == '(') {
            ++i;
            std::string lit = read_literal(s, i);
            if (in_text) pending.push_back(std::move(lit));
        } else if (c == '%') {
            while (i < s.size() && s[i] != '\n' && s[i] != '\r') ++i;
        } else if (c == '[' || c == ']') {
            ++i;
        } else if (c == '-' || (c >= '0' && c <= '9') || c == '.') {
            const std::size_t b = i;
            while (i < s.size() && !is_delim(s[i])) ++i;
            // Large negative kerning inside TJ arrays marks a word gap.
            if (in_text && !pending.empty()) {
                try {
                    if (std::stod(std::string(s.substr(b, i - b))) < -200.0) pending.back().push_back(' ');
                } catch (...) {
                }
            }
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '\'' || c == '"' || c == '*') {
            const std::size_t b = i;
            while (i < s.size() && !is_delim(s[i])) ++i;
            const std::string_view op = s.substr(b, std::max<std::size_t>(i - b, 1));
            if (op == "BT") {
                in_text = true;
            } else if (op == "ET") {
                in_text = false;
                flush_line();
            } else if (op == "Tj" || op == "TJ" || op == "'" || op == "\"") {
                if (op == "'" || op == "\"") flush_line();
                for (auto& p : pending) line += p;
                pending.clear();
            } else if (op == "T*" || op == "Td" || op == "TD" || op == "Tm") {
                flush_line();
            }
            if (i == b) ++i;
        } else {
            ++i;
        }
    }
    flush_line();
}

}  // namespace

std::string extract_pdf_text(std::string_view pdf) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t kw = pdf.find("stream", pos);
        if (kw == std::string_view::npos) break;
        // Skip the "endstream" keyword itself.
        if (kw >= 3 && pdf.substr(kw - 3, 3) == "end") {
            pos = kw + 6;
            continue;
        }
        std::size_t data_begin = kw + 6;
        if (data_begin < pdf.size() && pdf[data_begin] == '\r') ++data_begin;
        if (data_begin < pdf.size() && pdf[data_begin] == '\n') ++data_begin;
        const std::size_t data_end = pdf.find("endstream", data_begin);
        if (data_end == std::string_view::npos) break;

        const std::size_t dict_begin = pdf.rfind("<<", kw);
        const std::string_view dict =
            dict_begin == std::string_view::npos ? std::string_view{} : pdf.substr(dict_begin, kw - dict_begin);
        const std::string_view raw = pdf.substr(data_begin, data_end - data_begin);

        const bool is_image = dict.find("/Image") != std::string_view::npos ||
                              dict.find("/XObject") != std::string_view::npos;
        if (!is_image) {
            if (dict.find("/FlateDecode") != std::string_view::npos) {
                extract_from_content(inflate_stream(raw), out);
            } else if (dict.find("/Filter") == std::string_view::npos) {
                extract_from_content(raw, out);
            }
        }
        pos = data_end + 9;
    }
    return out;
}

}  // namespace ragcal
