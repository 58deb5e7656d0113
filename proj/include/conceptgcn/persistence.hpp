#pragma once

// Model parameters on disk: `<stem>.bin` holds every matrix back to back as
// little-endian 64-bit floats, `<stem>.json` lists names, shapes and offsets.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "conceptgcn/layers.hpp"

namespace conceptgcn {

using NamedMatrices = std::map<std::string, DenseMatrix>;

void save_parameters(const std::vector<ParamRef>& params, const std::filesystem::path& bin_path,
                     const std::filesystem::path& manifest_path);

// Throws ParseError on missing files, truncated data or a malformed manifest.
NamedMatrices load_parameters(const std::filesystem::path& bin_path,
                              const std::filesystem::path& manifest_path);

// Copies loaded values into `params` by name; DimensionError on shape
// mismatch, ParseError when a name is missing.
void assign_parameters(const NamedMatrices& loaded, const std::vector<ParamRef>& params);

}  // namespace conceptgcn
