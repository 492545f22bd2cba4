#ifndef SALFOLD_MANIFEST_HPP
#define SALFOLD_MANIFEST_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "salfold/error.hpp"
#include "salfold/irma.hpp"

namespace salfold {

enum class Split { train, test };

inline const char* split_name(Split s) { return s == Split::train ? "train" : "test"; }

struct ManifestEntry {
    std::string path; // resolved (absolute or relative to cwd)
    IrmaCode code;
    Split split = Split::train;
};

/// Dataset manifest: one `path<TAB>irma_code<TAB>split` line per image.
/// Lines starting with '#' and blank lines are ignored. Relative image paths
/// are resolved against the manifest file's directory.
struct DatasetManifest {
    std::vector<ManifestEntry> entries;

    std::vector<const ManifestEntry*> split_entries(Split s) const {
        std::vector<const ManifestEntry*> out;
        for (const auto& e : entries)
            if (e.split == s) out.push_back(&e);
        return out;
    }

    /// Distinct train-split codes in sorted order; the class label table.
    std::vector<IrmaCode> class_table() const {
        std::map<IrmaCode, int> seen;
        for (const auto& e : entries)
            if (e.split == Split::train) seen.emplace(e.code, 0);
        std::vector<IrmaCode> out;
        out.reserve(seen.size());
        for (const auto& [code, _] : seen) out.push_back(code);
        return out;
    }
};

inline DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::unreadable_file, path);
    const auto base = std::filesystem::path(path).parent_path();
    DatasetManifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 3)
            raise(Errc::bad_manifest, path + ":" + std::to_string(lineno) +
                                          ": expected path<TAB>code<TAB>split");
        ManifestEntry e;
        std::filesystem::path p(trim(fields[0]));
        e.path = (p.is_absolute() ? p : base / p).string();
        e.code = parse_code(fields[1]);
        const std::string sp = trim(fields[2]);
        if (sp == "train")
            e.split = Split::train;
        else if (sp == "test")
            e.split = Split::test;
        else
            raise(Errc::bad_manifest,
                  path + ":" + std::to_string(lineno) + ": unknown split '" + sp + "'");
        m.entries.push_back(std::move(e));
    }
    return m;
}

/// Writes entries with paths relative to the manifest's own directory when
/// possible, so a corpus directory can be moved as a unit.
inline void write_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::io_error, "cannot write " + path);
    const auto base = std::filesystem::path(path).parent_path();
    for (const auto& e : m.entries) {
        std::filesystem::path p(e.path);
        std::error_code ec;
        const auto rel = std::filesystem::relative(p, base, ec);
        const std::string shown = (!ec && !rel.empty()) ? rel.string() : e.path;
        out << shown << "\t" << e.code.canonical() << "\t" << split_name(e.split) << "\n";
    }
    if (!out) raise(Errc::io_error, "short write to " + path);
}

} // namespace salfold

#endif
