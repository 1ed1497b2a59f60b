#pragma once

#include "agesl/date.hpp"

#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace agesl::text {

struct Token {
    int id = 0;
    std::string form;
    std::string lemma;
    std::string upos;
    std::string xpos;
    int head = -1;  // -1 when the column is "_"
    std::string deprel;
    std::string misc;

    /// Value of `key=` in the MISC column, empty if absent.
    std::string misc_value(std::string_view key) const;
    bool annotated() const noexcept { return !upos.empty() && upos != "_" && head >= 0 && !deprel.empty() && deprel != "_"; }
};

struct Sentence {
    std::string id;
    std::string text;
    std::vector<Token> tokens;

    /// Token with 1-based CoNLL-U id, nullptr if out of range.
    const Token* token(int id) const;
};

struct Document {
    std::string id;
    std::string date;
    std::vector<Sentence> sentences;
};

/// Reads 10-column CoNLL-U. A `# newdoc id = ...` comment opens a new
/// document; `# date = ...` is attached to the current document. Multiword
/// token ranges and empty nodes are skipped.
std::vector<Document> parse_conllu(std::istream& in, const std::string& source_name);
std::vector<Document> read_conllu(const std::filesystem::path& path);

struct ManifestEntry {
    std::string item_id;
    Date date;
    std::string conllu;  // path relative to the manifest
    std::size_t source_line = 0;
};

/// One JSON object per line with keys item_id, date, conllu, source_line.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

/// Documents of every manifest entry, grouped by date in ascending order.
/// Fails if an item id does not resolve to exactly one document.
std::map<Date, std::vector<Document>> load_annotated_clusters(const std::filesystem::path& manifest_path);

}  // namespace agesl::text
