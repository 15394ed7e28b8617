#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "vapc/core.hpp"

namespace vapc {

enum class IoErrorKind : std::uint8_t {
    unreadable,
    bad_magic,
    bad_version,
    truncated,
    malformed,
    unknown_viewpoint,
    unknown_split,
};

std::string_view to_string(IoErrorKind k);

struct IoError : std::runtime_error {
    IoErrorKind kind;
    IoError(IoErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind(kind) {}
};

// Binary embedding file: magic "VAPC", version byte 1, u32-LE row count,
// u32-LE dimension, then rows of little-endian float32. The decode/encode
// pair round-trips bit-exactly; no normalization happens here.
EmbeddingSet read_embeddings(const std::filesystem::path& path);
void write_embeddings(const std::filesystem::path& path,
                      const EmbeddingSet& embeddings);

// Metadata: one JSON object per line with keys index, camera, split, and
// optionally viewpoint and id.
std::vector<SampleMeta> read_metadata(const std::filesystem::path& path);
void write_metadata(const std::filesystem::path& path,
                    const std::vector<SampleMeta>& meta);

struct LabelRow {
    std::size_t index = 0;
    int label = 0;
    int iteration = 0;
};

// CSV with header "index,label,iteration".
void write_labels(const std::filesystem::path& path,
                  const std::vector<LabelRow>& rows);
std::vector<LabelRow> read_labels(const std::filesystem::path& path);

}  // namespace vapc
