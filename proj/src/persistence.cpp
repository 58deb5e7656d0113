#include "conceptgcn/persistence.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "conceptgcn/errors.hpp"

namespace conceptgcn {

using json = nlohmann::json;

namespace {

void put_le(std::ostream& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

double get_le(const unsigned char* bytes) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_parameters(const std::vector<ParamRef>& params, const std::filesystem::path& bin_path,
                     const std::filesystem::path& manifest_path) {
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw Error("cannot write " + bin_path.string());
    json entries = json::array();
    std::size_t offset = 0;
    for (const auto& p : params) {
        for (double v : p.value->values()) put_le(bin, v);
        entries.push_back({{"name", p.name},
                           {"rows", p.value->rows()},
                           {"cols", p.value->cols()},
                           {"offset", offset}});
        offset += p.value->size();
    }
    json manifest = {{"format", "f64-le"},
                     {"file", bin_path.filename().string()},
                     {"count", offset},
                     {"tensors", entries}};
    std::ofstream out(manifest_path, std::ios::binary);
    if (!out) throw Error("cannot write " + manifest_path.string());
    out << manifest.dump(2) << '\n';
}

NamedMatrices load_parameters(const std::filesystem::path& bin_path,
                              const std::filesystem::path& manifest_path) {
    std::ifstream mf(manifest_path);
    if (!mf) throw ParseError("cannot open " + manifest_path.string());
    json manifest;
    try {
        manifest = json::parse(mf);
    } catch (const json::parse_error& e) {
        throw ParseError(manifest_path.string() + ": " + e.what());
    }
    std::ifstream bf(bin_path, std::ios::binary);
    if (!bf) throw ParseError("cannot open " + bin_path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bf)),
                                           std::istreambuf_iterator<char>());
    const std::size_t available = bytes.size() / 8;

    NamedMatrices out;
    try {
        if (manifest.at("format").get<std::string>() != "f64-le") {
            throw ParseError(manifest_path.string() + ": unsupported format");
        }
        for (const auto& e : manifest.at("tensors")) {
            const auto rows = e.at("rows").get<std::size_t>();
            const auto cols = e.at("cols").get<std::size_t>();
            const auto offset = e.at("offset").get<std::size_t>();
            if (offset + rows * cols > available) {
                throw ParseError(bin_path.string() + ": truncated at tensor " +
                                 e.at("name").get<std::string>());
            }
            DenseMatrix m(rows, cols);
            auto vals = m.values();
            for (std::size_t i = 0; i < vals.size(); ++i) {
                vals[i] = get_le(bytes.data() + 8 * (offset + i));
            }
            out.emplace(e.at("name").get<std::string>(), std::move(m));
        }
    } catch (const json::exception& e) {
        throw ParseError(manifest_path.string() + ": " + e.what());
    }
    return out;
}

void assign_parameters(const NamedMatrices& loaded, const std::vector<ParamRef>& params) {
    for (const auto& p : params) {
        const auto it = loaded.find(p.name);
        if (it == loaded.end()) throw ParseError("parameter '" + p.name + "' missing from file");
        if (!p.value->empty() && !it->second.same_shape(*p.value)) {
            throw DimensionError("parameter '" + p.name + "': stored " + shape_of(it->second) +
                                 ", model expects " + shape_of(*p.value));
        }
        *p.value = it->second;
    }
}

}  // namespace conceptgcn
