#include "datasets.hpp"

#include <cstdlib>

namespace conceptgcn::cli {

namespace fs = std::filesystem;

fs::path default_data_dir() {
    if (const char* env = std::getenv("CONCEPTGCN_DATA_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "data";
}

ResolvedDataset load_dataset_files(const std::string& format, const std::vector<fs::path>& files) {
    ResolvedDataset out;
    out.format = format;
    out.files = files;
    if (format == "json" && files.size() == 1) {
        out.graph = load_json_graph(files[0], &out.ingest);
    } else if (format == "linqs" && files.size() == 2) {
        out.graph = load_linqs(files[0], files[1], &out.ingest);
    } else if (format == "pubmed-tab" && files.size() == 2) {
        out.graph = load_pubmed_tab(files[0], files[1], &out.ingest);
    } else {
        throw ConfigError("dataset: unsupported format '" + format + "'");
    }
    return out;
}

ResolvedDataset resolve_dataset(const std::string& name_or_path, const fs::path& data_dir) {
    if (name_or_path.empty()) throw DatasetNotFound("dataset: empty name");
    const fs::path direct(name_or_path);
    if (direct.extension() == ".json" && fs::is_regular_file(direct)) {
        return load_dataset_files("json", {fs::absolute(direct)});
    }

    std::vector<std::string> tried;
    auto json_at = [&](const fs::path& p) {
        tried.push_back(p.string());
        return fs::is_regular_file(p);
    };
    auto linqs_at = [&](const fs::path& stem) {
        fs::path content = stem, cites = stem;
        content += ".content";
        cites += ".cites";
        tried.push_back(content.string() + " + .cites");
        return fs::is_regular_file(content) && fs::is_regular_file(cites);
    };

    const fs::path flat = data_dir / (name_or_path + ".json");
    if (json_at(flat)) return load_dataset_files("json", {fs::absolute(flat)});
    const fs::path nested = data_dir / name_or_path / (name_or_path + ".json");
    if (json_at(nested)) return load_dataset_files("json", {fs::absolute(nested)});
    for (const fs::path& stem : {data_dir / name_or_path / name_or_path, data_dir / name_or_path}) {
        if (linqs_at(stem)) {
            const fs::path base = fs::absolute(stem);
            return load_dataset_files("linqs", {fs::path(base).concat(".content"),
                                                fs::path(base).concat(".cites")});
        }
    }

    // The PubMed release unpacks to Pubmed-Diabetes/data/*.tab.
    std::vector<fs::path> tab_dirs = {data_dir / name_or_path, data_dir / name_or_path / "data"};
    if (name_or_path == "pubmed") {
        tab_dirs.push_back(data_dir / "Pubmed-Diabetes");
        tab_dirs.push_back(data_dir / "Pubmed-Diabetes" / "data");
    }
    for (const fs::path& dir : tab_dirs) {
        const fs::path nodes = dir / "Pubmed-Diabetes.NODE.paper.tab";
        const fs::path cites = dir / "Pubmed-Diabetes.DIRECTED.cites.tab";
        tried.push_back(nodes.string() + " + DIRECTED.cites.tab");
        if (fs::is_regular_file(nodes) && fs::is_regular_file(cites)) {
            return load_dataset_files("pubmed-tab", {fs::absolute(nodes), fs::absolute(cites)});
        }
    }

    std::string msg = "unknown dataset '" + name_or_path + "'; looked for:";
    for (const auto& t : tried) msg += "\n  " + t;
    throw DatasetNotFound(msg);
}

}  // namespace conceptgcn::cli
