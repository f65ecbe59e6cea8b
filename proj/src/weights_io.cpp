#include "dbfuse/weights_io.hpp"

#include <cstdio>
#include <fstream>

#include "dbfuse/errors.hpp"

namespace dbfuse {

namespace {
constexpr char kMagic[4] = {'D', 'B', 'F', 'W'};
constexpr uint32_t kVersion = 1;
}  // namespace

void write_blob_file(const std::string& path,
                     const std::vector<std::pair<std::string, const std::vector<float>*>>& blobs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open for writing: " + path);
    }
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    uint64_t count = blobs.size();
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    for (const auto& [tag, w] : blobs) {
        uint32_t tag_len = static_cast<uint32_t>(tag.size());
        out.write(reinterpret_cast<const char*>(&tag_len), sizeof(tag_len));
        out.write(tag.data(), tag_len);
        uint64_t n = w->size();
        out.write(reinterpret_cast<const char*>(&n), sizeof(n));
        out.write(reinterpret_cast<const char*>(w->data()),
                  static_cast<std::streamsize>(n * sizeof(float)));
    }
    if (!out) {
        throw DataError("short write: " + path);
    }
}

void write_blob_file(const std::string& path, const std::vector<ParamBlob*>& blobs) {
    std::vector<std::pair<std::string, const std::vector<float>*>> named;
    named.reserve(blobs.size());
    for (const ParamBlob* blob : blobs) {
        named.emplace_back(blob->tag, &blob->w);
    }
    write_blob_file(path, named);
}

std::map<std::string, std::vector<float>> read_blob_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open weights file: " + path);
    }
    char magic[4];
    uint32_t version = 0;
    uint64_t count = 0;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&count), sizeof(count));
    if (!in || std::string(magic, 4) != std::string(kMagic, 4) || version != kVersion) {
        throw DataError("not a valid weights file: " + path);
    }
    std::map<std::string, std::vector<float>> blobs;
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t tag_len = 0;
        in.read(reinterpret_cast<char*>(&tag_len), sizeof(tag_len));
        std::string tag(tag_len, '\0');
        in.read(tag.data(), tag_len);
        uint64_t n = 0;
        in.read(reinterpret_cast<char*>(&n), sizeof(n));
        std::vector<float> w(n);
        in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(n * sizeof(float)));
        if (!in) {
            throw DataError("truncated weights file: " + path);
        }
        blobs.emplace(std::move(tag), std::move(w));
    }
    return blobs;
}

std::string file_content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open for hashing: " + path);
    }
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

}  // namespace dbfuse
