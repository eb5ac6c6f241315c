#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tofusion/camera.hpp"
#include "tofusion/raster.hpp"

namespace tofusion {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MagicError : IoError {
    using IoError::IoError;
};
struct TruncationError : IoError {
    using IoError::IoError;
};
struct DimensionError : IoError {
    using IoError::IoError;
};
struct FormatError : IoError {
    using IoError::IoError;
};

namespace detail {

// All binary formats are little-endian on disk.
inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    put_u32(os, static_cast<std::uint32_t>(v));
    put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint32_t get_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw TruncationError(std::string("truncated while reading ") + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& is, const char* what) {
    const std::uint64_t lo = get_u32(is, what);
    const std::uint64_t hi = get_u32(is, what);
    return lo | (hi << 32);
}

inline std::uint32_t float_bits(float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    return u;
}

inline float bits_float(std::uint32_t u) {
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

constexpr std::uint32_t kInvalidDepthBits = 0x7FC00000u;

inline void put_f32(std::ostream& os, float f) { put_u32(os, float_bits(f)); }

inline float get_f32(std::istream& is, const char* what) { return bits_float(get_u32(is, what)); }

constexpr std::uint64_t kMaxPixels = 1ull << 28;

}  // namespace detail

// ---------------------------------------------------------------------------
// DMAP: magic "DMAP", u32 width, u32 height, then width*height f32 row-major.
// Invalid pixel on disk is the exact bit pattern 0x7FC00000.
// ---------------------------------------------------------------------------

inline void write_dmap(std::ostream& os, const DepthMap& d) {
    os.write("DMAP", 4);
    detail::put_u32(os, static_cast<std::uint32_t>(d.width()));
    detail::put_u32(os, static_cast<std::uint32_t>(d.height()));
    for (float v : d.values())
        detail::put_u32(os, depth_valid(v) ? detail::float_bits(v) : detail::kInvalidDepthBits);
    if (!os) throw IoError("DMAP: write failed");
}

inline DepthMap read_dmap(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4)) throw TruncationError("DMAP: truncated magic");
    if (std::memcmp(magic, "DMAP", 4) != 0) throw MagicError("DMAP: bad magic");
    const std::uint64_t w = detail::get_u32(is, "DMAP width");
    const std::uint64_t h = detail::get_u32(is, "DMAP height");
    if (w == 0 || h == 0 || w * h > detail::kMaxPixels)
        throw DimensionError("DMAP: dimensions out of range");
    DepthMap d(static_cast<int>(w), static_cast<int>(h));
    for (size_t i = 0; i < d.size(); ++i) {
        const float v = detail::get_f32(is, "DMAP data");
        if (std::isnan(v)) {
            d.values()[i] = invalid_depth();
        } else if (!std::isfinite(v) || v <= 0.0f) {
            throw FormatError("DMAP: depth values must be positive and finite");
        } else {
            d.values()[i] = v;
        }
    }
    return d;
}

inline void write_dmap_file(const std::string& path, const DepthMap& d) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    write_dmap(os, d);
}

inline DepthMap read_dmap_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path);
    return read_dmap(is);
}

// ---------------------------------------------------------------------------
// RGB: binary PPM (P6), 8-bit, mapped to [0,1] floats.
// ---------------------------------------------------------------------------

inline void write_ppm(std::ostream& os, const RgbImage& img) {
    os << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    std::vector<unsigned char> row(static_cast<size_t>(img.width()) * 3);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < 3; ++c) {
                const float v = img.at(x, y, c);
                const float clamped = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
                row[static_cast<size_t>(x) * 3 + c] =
                    static_cast<unsigned char>(std::lround(clamped * 255.0f));
            }
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!os) throw IoError("PPM: write failed");
}

inline RgbImage read_ppm(std::istream& is) {
    std::string magic;
    is >> magic;
    if (magic != "P6") throw MagicError("PPM: bad magic (want P6)");
    std::int64_t w = 0, h = 0, maxval = 0;
    is >> w >> h >> maxval;
    if (!is) throw TruncationError("PPM: truncated header");
    if (w < 1 || h < 1 || static_cast<std::uint64_t>(w) * h > detail::kMaxPixels)
        throw DimensionError("PPM: dimensions out of range");
    if (maxval != 255) throw FormatError("PPM: only maxval 255 supported");
    is.get();  // single whitespace after header
    RgbImage img(static_cast<int>(w), static_cast<int>(h));
    std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        if (!is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size())))
            throw TruncationError("PPM: truncated pixel data");
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = static_cast<float>(row[static_cast<size_t>(x) * 3 + c]) / 255.0f;
    }
    return img;
}

inline void write_ppm_file(const std::string& path, const RgbImage& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    write_ppm(os, img);
}

inline RgbImage read_ppm_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path);
    return read_ppm(is);
}

// ---------------------------------------------------------------------------
// Calibration: JSON with fixed key names. dist is [k1, k2, p1, p2, k3]
// (OpenCV coefficient order); R is 9 row-major numbers, t is 3 numbers.
// ---------------------------------------------------------------------------

inline nlohmann::json camera_to_json(const CameraModel& cam) {
    const Intrinsics& k = cam.intrinsics;
    const Distortion& d = cam.distortion;
    return {{"fx", k.fx},       {"fy", k.fy},         {"cx", k.cx},
            {"cy", k.cy},       {"width", k.width},   {"height", k.height},
            {"dist", {d.k1, d.k2, d.p1, d.p2, d.k3}}};
}

inline CameraModel camera_from_json(const nlohmann::json& j, const std::string& name) {
    CameraModel cam;
    try {
        cam.intrinsics.fx = j.at("fx").get<double>();
        cam.intrinsics.fy = j.at("fy").get<double>();
        cam.intrinsics.cx = j.at("cx").get<double>();
        cam.intrinsics.cy = j.at("cy").get<double>();
        cam.intrinsics.width = j.at("width").get<int>();
        cam.intrinsics.height = j.at("height").get<int>();
        const auto& dist = j.at("dist");
        if (!dist.is_array() || dist.size() != 5)
            throw FormatError("calibration: " + name + ".dist must have 5 entries");
        cam.distortion.k1 = dist[0].get<double>();
        cam.distortion.k2 = dist[1].get<double>();
        cam.distortion.p1 = dist[2].get<double>();
        cam.distortion.p2 = dist[3].get<double>();
        cam.distortion.k3 = dist[4].get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("calibration: bad camera block '" + name + "': " + e.what());
    }
    try {
        cam.intrinsics.validate();
        cam.distortion.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError("calibration: " + name + ": " + e.what());
    }
    return cam;
}

inline nlohmann::json rig_to_json(const CameraRig& rig) {
    nlohmann::json ext;
    ext["R"] = rig.extrinsic.r.m;
    ext["t"] = {rig.extrinsic.t.x, rig.extrinsic.t.y, rig.extrinsic.t.z};
    return {{"itof", camera_to_json(rig.itof)},
            {"rgb", camera_to_json(rig.rgb)},
            {"extrinsic", ext}};
}

inline CameraRig rig_from_json(const nlohmann::json& j) {
    CameraRig rig;
    rig.itof = camera_from_json(j.at("itof"), "itof");
    rig.rgb = camera_from_json(j.at("rgb"), "rgb");
    const auto& ext = j.at("extrinsic");
    const auto& r = ext.at("R");
    const auto& t = ext.at("t");
    if (!r.is_array() || r.size() != 9) throw FormatError("calibration: extrinsic.R must have 9 entries");
    if (!t.is_array() || t.size() != 3) throw FormatError("calibration: extrinsic.t must have 3 entries");
    Mat3 rot;
    for (int i = 0; i < 9; ++i) rot.m[static_cast<size_t>(i)] = r[i].get<double>();
    const Vec3 trans{t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
    try {
        rig.extrinsic = RigidTransform(rot, trans);
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("calibration: extrinsic.R: ") + e.what());
    }
    return rig;
}

inline void write_rig_file(const std::string& path, const CameraRig& rig) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << rig_to_json(rig).dump(2) << "\n";
}

inline CameraRig read_rig_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open for reading: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("calibration: invalid JSON: ") + e.what());
    }
    return rig_from_json(j);
}

// ---------------------------------------------------------------------------
// Checkpoint: magic "CKPT", u32 version, u64 config hash, u32 epoch,
// u32 entry count, then per entry (u32 name length, name bytes, u32 rank,
// u32 dims..., f32 data). Round-trips byte-exactly.
// ---------------------------------------------------------------------------

struct CheckpointEntry {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

struct Checkpoint {
    std::uint32_t version = 1;
    std::uint64_t config_hash = 0;
    std::uint32_t epoch = 0;
    std::vector<CheckpointEntry> entries;

    const CheckpointEntry* find(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }
};

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
    os.write("CKPT", 4);
    detail::put_u32(os, ck.version);
    detail::put_u64(os, ck.config_hash);
    detail::put_u32(os, ck.epoch);
    detail::put_u32(os, static_cast<std::uint32_t>(ck.entries.size()));
    for (const auto& e : ck.entries) {
        detail::put_u32(os, static_cast<std::uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        detail::put_u32(os, static_cast<std::uint32_t>(e.dims.size()));
        std::uint64_t numel = 1;
        for (std::uint32_t d : e.dims) {
            detail::put_u32(os, d);
            numel *= d;
        }
        if (numel != e.data.size()) throw IoError("checkpoint: entry size mismatch: " + e.name);
        for (float f : e.data) detail::put_f32(os, f);
    }
    if (!os) throw IoError("checkpoint: write failed");
}

inline Checkpoint read_checkpoint(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4)) throw TruncationError("checkpoint: truncated magic");
    if (std::memcmp(magic, "CKPT", 4) != 0) throw MagicError("checkpoint: bad magic");
    Checkpoint ck;
    ck.version = detail::get_u32(is, "checkpoint version");
    if (ck.version != 1) throw FormatError("checkpoint: unsupported version");
    ck.config_hash = detail::get_u64(is, "checkpoint config hash");
    ck.epoch = detail::get_u32(is, "checkpoint epoch");
    const std::uint32_t count = detail::get_u32(is, "checkpoint entry count");
    ck.entries.resize(count);
    for (auto& e : ck.entries) {
        const std::uint32_t name_len = detail::get_u32(is, "entry name length");
        if (name_len > 4096) throw DimensionError("checkpoint: entry name too long");
        e.name.resize(name_len);
        if (!is.read(e.name.data(), name_len)) throw TruncationError("checkpoint: truncated entry name");
        const std::uint32_t rank = detail::get_u32(is, "entry rank");
        if (rank > 8) throw DimensionError("checkpoint: entry rank out of range");
        e.dims.resize(rank);
        std::uint64_t numel = 1;
        for (auto& d : e.dims) {
            d = detail::get_u32(is, "entry dim");
            numel *= d;
        }
        if (numel > detail::kMaxPixels) throw DimensionError("checkpoint: entry too large");
        e.data.resize(numel);
        for (auto& f : e.data) f = detail::get_f32(is, "entry data");
    }
    return ck;
}

inline void write_checkpoint_file(const std::string& path, const Checkpoint& ck) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    write_checkpoint(os, ck);
}

inline Checkpoint read_checkpoint_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path);
    return read_checkpoint(is);
}

// FNV-1a 64-bit, used for config fingerprints.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace tofusion
