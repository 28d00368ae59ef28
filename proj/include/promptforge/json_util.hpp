#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "promptforge/errors.hpp"

namespace promptforge {

using json = nlohmann::json;

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path.string());
    return buffer.str();
}

// Writes via a sibling temp file plus rename, so a failed command never
// leaves a partial output behind.
inline void write_text_file_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path dir = path.parent_path();
    if (!dir.empty()) {
        std::error_code ec;
        fs::create_directories(dir, ec);
    }
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open file for writing: " + tmp.string());
        out << content;
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("rename failed for " + path.string());
    }
}

inline json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ValidationError("invalid JSON in " + path.string());
    return doc;
}

inline void write_json_file_atomic(const std::filesystem::path& path, const json& doc, int indent = 2) {
    write_text_file_atomic(path, doc.dump(indent) + "\n");
}

struct JsonlLines {
    std::vector<json> records;
    // True when the file ends in an unterminated or unparseable final line
    // (an interrupted writer); callers rewrite the file before appending.
    bool broken_tail = false;
};

inline JsonlLines read_jsonl_file(const std::filesystem::path& path) {
    JsonlLines result;
    if (!std::filesystem::exists(path)) return result;
    const std::string text = read_text_file(path);
    std::size_t begin = 0;
    while (begin < text.size()) {
        std::size_t end = text.find('\n', begin);
        const bool terminated = end != std::string::npos;
        if (!terminated) end = text.size();
        const std::string line = text.substr(begin, end - begin);
        begin = terminated ? end + 1 : text.size();
        if (line.empty()) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded() || !terminated) {
            result.broken_tail = true;
            break;
        }
        result.records.push_back(std::move(doc));
    }
    return result;
}

// First balanced {...} object embedded in free-form text. LLM replies often
// wrap JSON in prose or code fences; this digs the object out.
inline std::optional<json> extract_first_json_object(const std::string& text) {
    for (std::size_t start = text.find('{'); start != std::string::npos;
         start = text.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            const char c = text[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) {
                    json doc = json::parse(text.substr(start, i - start + 1), nullptr, false);
                    if (!doc.is_discarded()) return doc;
                    break;
                }
            }
        }
    }
    return std::nullopt;
}

// Shortest round-trip representation, same as JSON serialization uses.
inline std::string format_double(double value) {
    return json(value).dump();
}

} // namespace promptforge
