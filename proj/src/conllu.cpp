#include "agesl/conllu.hpp"
#include "agesl/error.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace agesl::text {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return out;
}

bool parse_int(std::string_view s, int& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// "# key = value" comments; returns false for other comments.
bool comment_field(std::string_view line, std::string& key, std::string& value) {
    line.remove_prefix(1);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) return false;
    key = std::string(trim(line.substr(0, eq)));
    value = std::string(trim(line.substr(eq + 1)));
    return true;
}

}  // namespace

std::string Token::misc_value(std::string_view key) const {
    std::string_view rest = misc;
    while (!rest.empty()) {
        const auto bar = rest.find('|');
        const std::string_view item = rest.substr(0, bar);
        if (item.size() > key.size() && item.substr(0, key.size()) == key && item[key.size()] == '=') {
            return std::string(item.substr(key.size() + 1));
        }
        if (bar == std::string_view::npos) break;
        rest.remove_prefix(bar + 1);
    }
    return {};
}

const Token* Sentence::token(int id) const {
    for (const auto& t : tokens) {
        if (t.id == id) return &t;
    }
    return nullptr;
}

std::vector<Document> parse_conllu(std::istream& in, const std::string& source_name) {
    std::vector<Document> docs;
    Sentence current;
    bool in_sentence = false;
    auto doc = [&]() -> Document& {
        if (docs.empty()) docs.emplace_back();
        return docs.back();
    };
    auto flush = [&] {
        if (in_sentence && !current.tokens.empty()) doc().sentences.push_back(std::move(current));
        current = Sentence{};
        in_sentence = false;
    };
    std::string line;
    std::size_t lineno = 0;
    std::string key, value;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) {
            flush();
            continue;
        }
        if (line[0] == '#') {
            if (!comment_field(line, key, value)) continue;
            if (key == "newdoc id" || key == "newdoc") {
                flush();
                docs.emplace_back();
                docs.back().id = value;
            } else if (key == "date") {
                doc().date = value;
            } else if (key == "sent_id") {
                current.id = value;
            } else if (key == "text") {
                current.text = value;
            }
            continue;
        }
        const auto cols = split_tabs(line);
        if (cols.size() != 10) {
            throw Error(ErrorKind::Parse, source_name + ":" + std::to_string(lineno) + ": expected 10 tab-separated columns, found " +
                                              std::to_string(cols.size()));
        }
        if (cols[0].find_first_of("-.") != std::string_view::npos) continue;
        Token tok;
        if (!parse_int(cols[0], tok.id) || tok.id < 1) {
            throw Error(ErrorKind::Parse, source_name + ":" + std::to_string(lineno) + ": bad token id '" + std::string(cols[0]) + "'");
        }
        tok.form = std::string(cols[1]);
        tok.lemma = std::string(cols[2]);
        tok.upos = std::string(cols[3]);
        tok.xpos = std::string(cols[4]);
        if (cols[6] != "_" && (!parse_int(cols[6], tok.head) || tok.head < 0)) {
            throw Error(ErrorKind::Parse, source_name + ":" + std::to_string(lineno) + ": bad head '" + std::string(cols[6]) + "'");
        }
        tok.deprel = std::string(cols[7]);
        tok.misc = std::string(cols[9]);
        current.tokens.push_back(std::move(tok));
        in_sentence = true;
    }
    flush();
    return docs;
}

std::vector<Document> read_conllu(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open CoNLL-U file " + path.string());
    return parse_conllu(in, path.string());
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open manifest " + path.string());
    std::vector<ManifestEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto where = path.string() + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Parse, where + ": " + e.what());
        }
        ManifestEntry e;
        try {
            e.item_id = j.at("item_id").get<std::string>();
            const auto date = Date::parse(j.at("date").get<std::string>());
            if (!date) throw Error(ErrorKind::Parse, where + ": bad date");
            e.date = *date;
            e.conllu = j.at("conllu").get<std::string>();
            e.source_line = j.value("source_line", std::size_t{0});
        } catch (const nlohmann::json::exception& ex) {
            throw Error(ErrorKind::Parse, where + ": " + ex.what());
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::map<Date, std::vector<Document>> load_annotated_clusters(const std::filesystem::path& manifest_path) {
    const auto entries = read_manifest(manifest_path);
    const auto base = manifest_path.parent_path();
    std::unordered_map<std::string, std::unordered_map<std::string, std::vector<Document>>> files;
    std::map<Date, std::vector<Document>> clusters;
    for (const auto& e : entries) {
        auto it = files.find(e.conllu);
        if (it == files.end()) {
            std::unordered_map<std::string, std::vector<Document>> by_id;
            for (auto& d : read_conllu(base / e.conllu)) by_id[d.id].push_back(std::move(d));
            it = files.emplace(e.conllu, std::move(by_id)).first;
        }
        const auto found = it->second.find(e.item_id);
        if (found == it->second.end() || found->second.size() != 1) {
            throw Error(ErrorKind::MissingAnnotation,
                        "manifest item '" + e.item_id + "' does not resolve to exactly one document in " + e.conllu +
                            "; re-run the preproc annotate tool");
        }
        clusters[e.date].push_back(found->second.front());
    }
    return clusters;
}

}  // namespace agesl::text
