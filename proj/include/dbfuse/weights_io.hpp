#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dbfuse/layers.hpp"

namespace dbfuse {

// Tagged float-blob container (checkpoints and pretrained weight files).
void write_blob_file(const std::string& path,
                     const std::vector<std::pair<std::string, const std::vector<float>*>>& blobs);
void write_blob_file(const std::string& path, const std::vector<ParamBlob*>& blobs);
std::map<std::string, std::vector<float>> read_blob_file(const std::string& path);

// FNV-1a 64-bit over file contents, lowercase hex.
std::string file_content_hash(const std::string& path);

}  // namespace dbfuse
