#include "vapc/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace vapc {

namespace {

constexpr std::array<char, 4> kMagic{'V', 'A', 'P', 'C'};
constexpr std::uint8_t kVersion = 1;

void append_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t read_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) |
           (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(IoErrorKind::unreadable,
                      "cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(IoErrorKind::unreadable,
                      "cannot open " + path.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError(IoErrorKind::unreadable,
                      "short write to " + path.string());
    }
}

}  // namespace

std::string_view to_string(IoErrorKind k) {
    switch (k) {
        case IoErrorKind::unreadable: return "unreadable";
        case IoErrorKind::bad_magic: return "bad_magic";
        case IoErrorKind::bad_version: return "bad_version";
        case IoErrorKind::truncated: return "truncated";
        case IoErrorKind::malformed: return "malformed";
        case IoErrorKind::unknown_viewpoint: return "unknown_viewpoint";
        case IoErrorKind::unknown_split: return "unknown_split";
    }
    return "?";
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 13) {
        throw IoError(IoErrorKind::truncated,
                      path.string() + ": header is incomplete");
    }
    if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw IoError(IoErrorKind::bad_magic,
                      path.string() + ": bad magic bytes");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (p[4] != kVersion) {
        throw IoError(IoErrorKind::bad_version,
                      path.string() + ": unsupported version " +
                          std::to_string(p[4]));
    }
    const std::uint32_t n = read_u32_le(p + 5);
    const std::uint32_t d = read_u32_le(p + 9);
    const std::size_t expected =
        13 + static_cast<std::size_t>(n) * d * sizeof(float);
    if (bytes.size() < expected) {
        throw IoError(IoErrorKind::truncated,
                      path.string() + ": payload ends early (header says " +
                          std::to_string(n) + "x" + std::to_string(d) + ")");
    }
    if (bytes.size() > expected) {
        throw IoError(IoErrorKind::malformed,
                      path.string() + ": trailing bytes after payload");
    }

    EmbeddingSet out;
    out.n = n;
    out.d = d;
    out.data.resize(static_cast<std::size_t>(n) * d);
    const unsigned char* cursor = p + 13;
    for (double& value : out.data) {
        value = static_cast<double>(std::bit_cast<float>(read_u32_le(cursor)));
        cursor += 4;
    }
    return out;
}

void write_embeddings(const std::filesystem::path& path,
                      const EmbeddingSet& embeddings) {
    std::string bytes;
    bytes.reserve(13 + embeddings.data.size() * sizeof(float));
    bytes.append(kMagic.data(), kMagic.size());
    bytes.push_back(static_cast<char>(kVersion));
    append_u32_le(bytes, static_cast<std::uint32_t>(embeddings.n));
    append_u32_le(bytes, static_cast<std::uint32_t>(embeddings.d));
    for (double value : embeddings.data) {
        append_u32_le(bytes,
                      std::bit_cast<std::uint32_t>(static_cast<float>(value)));
    }
    write_file(path, bytes);
}

std::vector<SampleMeta> read_metadata(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError(IoErrorKind::unreadable,
                      "cannot open " + path.string());
    }
    std::vector<SampleMeta> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw IoError(IoErrorKind::malformed,
                          path.string() + ":" + std::to_string(line_no) +
                              ": not a JSON object");
        }
        SampleMeta m;
        if (!j.contains("index") || !j["index"].is_number_unsigned()) {
            throw IoError(IoErrorKind::malformed,
                          path.string() + ":" + std::to_string(line_no) +
                              ": missing or bad \"index\"");
        }
        m.index = j["index"].get<std::size_t>();
        if (!j.contains("camera") || !j["camera"].is_string()) {
            throw IoError(IoErrorKind::malformed,
                          path.string() + ":" + std::to_string(line_no) +
                              ": missing or bad \"camera\"");
        }
        m.camera = j["camera"].get<std::string>();
        if (!j.contains("split") || !j["split"].is_string()) {
            throw IoError(IoErrorKind::malformed,
                          path.string() + ":" + std::to_string(line_no) +
                              ": missing or bad \"split\"");
        }
        const auto split = parse_split(j["split"].get<std::string>());
        if (!split) {
            throw IoError(IoErrorKind::unknown_split,
                          path.string() + ":" + std::to_string(line_no) +
                              ": unknown split \"" +
                              j["split"].get<std::string>() + "\"");
        }
        m.split = *split;
        if (j.contains("viewpoint") && !j["viewpoint"].is_null()) {
            if (!j["viewpoint"].is_string()) {
                throw IoError(IoErrorKind::malformed,
                              path.string() + ":" + std::to_string(line_no) +
                                  ": bad \"viewpoint\"");
            }
            const auto vp = parse_viewpoint(j["viewpoint"].get<std::string>());
            if (!vp) {
                throw IoError(IoErrorKind::unknown_viewpoint,
                              path.string() + ":" + std::to_string(line_no) +
                                  ": unknown viewpoint \"" +
                                  j["viewpoint"].get<std::string>() + "\"");
            }
            m.viewpoint = *vp;
        }
        if (j.contains("id") && !j["id"].is_null()) {
            if (!j["id"].is_string()) {
                throw IoError(IoErrorKind::malformed,
                              path.string() + ":" + std::to_string(line_no) +
                                  ": bad \"id\"");
            }
            m.gt_id = j["id"].get<std::string>();
        }
        out.push_back(std::move(m));
    }
    return out;
}

void write_metadata(const std::filesystem::path& path,
                    const std::vector<SampleMeta>& meta) {
    std::vector<const SampleMeta*> ordered;
    ordered.reserve(meta.size());
    for (const SampleMeta& m : meta) ordered.push_back(&m);
    std::sort(ordered.begin(), ordered.end(),
              [](const SampleMeta* a, const SampleMeta* b) {
                  return a->index < b->index;
              });

    std::string bytes;
    for (const SampleMeta* m : ordered) {
        nlohmann::json j;
        j["index"] = m->index;
        j["camera"] = m->camera;
        j["split"] = to_string(m->split);
        if (m->viewpoint) j["viewpoint"] = to_string(*m->viewpoint);
        if (m->gt_id) j["id"] = *m->gt_id;
        bytes += j.dump();
        bytes += '\n';
    }
    write_file(path, bytes);
}

void write_labels(const std::filesystem::path& path,
                  const std::vector<LabelRow>& rows) {
    std::string bytes = "index,label,iteration\n";
    for (const LabelRow& row : rows) {
        bytes += std::to_string(row.index);
        bytes += ',';
        bytes += std::to_string(row.label);
        bytes += ',';
        bytes += std::to_string(row.iteration);
        bytes += '\n';
    }
    write_file(path, bytes);
}

std::vector<LabelRow> read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError(IoErrorKind::unreadable,
                      "cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != "index,label,iteration") {
        throw IoError(IoErrorKind::malformed,
                      path.string() + ": bad or missing header");
    }
    std::vector<LabelRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        LabelRow row;
        try {
            std::size_t first = line.find(',');
            std::size_t second = line.find(',', first + 1);
            if (first == std::string::npos || second == std::string::npos) {
                throw std::invalid_argument("need three fields");
            }
            row.index = std::stoull(line.substr(0, first));
            row.label = std::stoi(line.substr(first + 1, second - first - 1));
            row.iteration = std::stoi(line.substr(second + 1));
        } catch (const std::exception&) {
            throw IoError(IoErrorKind::malformed,
                          path.string() + ":" + std::to_string(line_no) +
                              ": bad label row");
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace vapc
