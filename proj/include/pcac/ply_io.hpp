#pragma once

#include <cstring>
#include <fstream>
#include <sstream>

#include "pcac/point_cloud.hpp"

namespace pcac {

namespace ply_detail {

enum class Scalar { I8, U8, I16, U16, I32, U32, F32, F64 };

inline bool scalar_from_name(const std::string& s, Scalar& out) {
    if (s == "char" || s == "int8") out = Scalar::I8;
    else if (s == "uchar" || s == "uint8") out = Scalar::U8;
    else if (s == "short" || s == "int16") out = Scalar::I16;
    else if (s == "ushort" || s == "uint16") out = Scalar::U16;
    else if (s == "int" || s == "int32") out = Scalar::I32;
    else if (s == "uint" || s == "uint32") out = Scalar::U32;
    else if (s == "float" || s == "float32") out = Scalar::F32;
    else if (s == "double" || s == "float64") out = Scalar::F64;
    else return false;
    return true;
}

inline size_t scalar_size(Scalar t) {
    switch (t) {
        case Scalar::I8:
        case Scalar::U8: return 1;
        case Scalar::I16:
        case Scalar::U16: return 2;
        case Scalar::I32:
        case Scalar::U32:
        case Scalar::F32: return 4;
        case Scalar::F64: return 8;
    }
    return 0;
}

inline double read_scalar_le(const uint8_t* p, Scalar t) {
    auto u16 = [&] { uint16_t v; std::memcpy(&v, p, 2); return v; };
    auto u32 = [&] { uint32_t v; std::memcpy(&v, p, 4); return v; };
    switch (t) {
        case Scalar::I8: return (double)(int8_t)p[0];
        case Scalar::U8: return (double)p[0];
        case Scalar::I16: return (double)(int16_t)u16();
        case Scalar::U16: return (double)u16();
        case Scalar::I32: return (double)(int32_t)u32();
        case Scalar::U32: return (double)u32();
        case Scalar::F32: {
            float f;
            std::memcpy(&f, p, 4);
            return (double)f;
        }
        case Scalar::F64: {
            double d;
            std::memcpy(&d, p, 8);
            return d;
        }
    }
    return 0.0;
}

struct Property {
    std::string name;
    Scalar type = Scalar::F32;
    bool is_list = false;
    Scalar count_type = Scalar::U8;
};

struct Element {
    std::string name;
    size_t count = 0;
    std::vector<Property> props;
};

}  // namespace ply_detail

// Reads ASCII or binary little-endian PLY with x,y,z and red,green,blue
// vertex properties. Colors are converted RGB -> YUV and duplicate positions
// are merged by channel-wise mean.
inline PointCloud load_ply(const std::string& path) {
    using namespace ply_detail;
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::IoError, "cannot open " + path);

    std::string line;
    if (!std::getline(f, line)) fail(ErrorKind::MalformedPly, "empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "ply") fail(ErrorKind::MalformedPly, "missing ply magic");

    bool binary = false, format_seen = false;
    std::vector<Element> elements;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "comment" || tok == "obj_info" || tok.empty()) continue;
        if (tok == "format") {
            std::string fmt;
            ss >> fmt;
            if (fmt == "ascii") binary = false;
            else if (fmt == "binary_little_endian") binary = true;
            else fail(ErrorKind::MalformedPly, "unsupported format " + fmt);
            format_seen = true;
        } else if (tok == "element") {
            Element e;
            ss >> e.name >> e.count;
            elements.push_back(e);
        } else if (tok == "property") {
            if (elements.empty()) fail(ErrorKind::MalformedPly, "property before element");
            Property p;
            std::string t;
            ss >> t;
            if (t == "list") {
                std::string ct, vt;
                ss >> ct >> vt >> p.name;
                p.is_list = true;
                if (!scalar_from_name(ct, p.count_type) || !scalar_from_name(vt, p.type))
                    fail(ErrorKind::MalformedPly, "bad list property types");
            } else {
                if (!scalar_from_name(t, p.type)) fail(ErrorKind::MalformedPly, "bad property type " + t);
                ss >> p.name;
            }
            elements.back().props.push_back(p);
        } else if (tok == "end_header") {
            break;
        } else {
            fail(ErrorKind::MalformedPly, "unknown header token " + tok);
        }
    }
    if (!format_seen) fail(ErrorKind::MalformedPly, "missing format line");

    size_t vtx_elem = elements.size();
    for (size_t i = 0; i < elements.size(); ++i)
        if (elements[i].name == "vertex") { vtx_elem = i; break; }
    if (vtx_elem == elements.size()) fail(ErrorKind::MalformedPly, "no vertex element");

    const Element& ve = elements[vtx_elem];
    int idx[6] = {-1, -1, -1, -1, -1, -1};
    const char* names[6] = {"x", "y", "z", "red", "green", "blue"};
    for (size_t p = 0; p < ve.props.size(); ++p) {
        if (ve.props[p].is_list) continue;
        for (int k = 0; k < 6; ++k)
            if (ve.props[p].name == names[k]) idx[k] = (int)p;
    }
    for (int k = 0; k < 6; ++k)
        if (idx[k] < 0) fail(ErrorKind::MalformedPly, std::string("missing vertex property ") + names[k]);

    // elements before vertex must be skippable
    auto skip_element = [&](const Element& e) {
        if (binary) {
            size_t row = 0;
            for (const auto& p : e.props) {
                if (p.is_list) fail(ErrorKind::MalformedPly, "list property before vertex element");
                row += scalar_size(p.type);
            }
            f.seekg((std::streamoff)(row * e.count), std::ios::cur);
        } else {
            std::string dummy;
            for (size_t i = 0; i < e.count; ++i)
                if (!std::getline(f, dummy)) fail(ErrorKind::MalformedPly, "truncated element");
        }
    };
    for (size_t i = 0; i < vtx_elem; ++i) skip_element(elements[i]);

    PointCloud raw;
    raw.positions.reserve(ve.count);
    raw.colors.reserve(ve.count);
    double vals[6];

    if (binary) {
        size_t row_size = 0;
        std::vector<size_t> offsets(ve.props.size());
        for (size_t p = 0; p < ve.props.size(); ++p) {
            if (ve.props[p].is_list) fail(ErrorKind::MalformedPly, "list property in vertex element");
            offsets[p] = row_size;
            row_size += scalar_size(ve.props[p].type);
        }
        std::vector<uint8_t> row(row_size);
        for (size_t i = 0; i < ve.count; ++i) {
            f.read((char*)row.data(), (std::streamsize)row_size);
            if (!f) fail(ErrorKind::MalformedPly, "truncated vertex data");
            for (int k = 0; k < 6; ++k)
                vals[k] = read_scalar_le(row.data() + offsets[idx[k]], ve.props[idx[k]].type);
            Coord c;
            for (int a = 0; a < 3; ++a) c[a] = (int32_t)std::llround(vals[a]);
            Color3 yuv = rgb_to_yuv({vals[3], vals[4], vals[5]});
            raw.positions.push_back(c);
            raw.colors.push_back({(float)yuv[0], (float)yuv[1], (float)yuv[2]});
        }
    } else {
        for (size_t i = 0; i < ve.count; ++i) {
            if (!std::getline(f, line)) fail(ErrorKind::MalformedPly, "truncated vertex data");
            std::istringstream ss(line);
            std::vector<double> fields(ve.props.size());
            for (size_t p = 0; p < ve.props.size(); ++p)
                if (!(ss >> fields[p])) fail(ErrorKind::MalformedPly, "short vertex row");
            for (int k = 0; k < 6; ++k) vals[k] = fields[idx[k]];
            Coord c;
            for (int a = 0; a < 3; ++a) c[a] = (int32_t)std::llround(vals[a]);
            Color3 yuv = rgb_to_yuv({vals[3], vals[4], vals[5]});
            raw.positions.push_back(c);
            raw.colors.push_back({(float)yuv[0], (float)yuv[1], (float)yuv[2]});
        }
    }

    int32_t maxc = 0;
    for (const Coord& p : raw.positions)
        for (int a = 0; a < 3; ++a) {
            if (p[a] < 0) fail(ErrorKind::MalformedPly, "negative coordinate");
            maxc = std::max(maxc, p[a]);
        }
    int bits = 8;
    while ((int64_t(1) << bits) <= maxc && bits < 16) ++bits;
    if ((int64_t(1) << bits) <= maxc) fail(ErrorKind::MalformedPly, "coordinate exceeds 16-bit range");
    raw.bit_depth = bits;

    PointCloud pc = merge_duplicates(raw);
    sort_canonical(pc);
    return pc;
}

// Writes binary little-endian PLY; YUV converted back to RGB, clamped and rounded.
inline void save_ply(const PointCloud& pc, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::IoError, "cannot open " + path + " for writing");
    f << "ply\nformat binary_little_endian 1.0\nelement vertex " << pc.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    for (size_t i = 0; i < pc.size(); ++i) {
        float xyz[3] = {(float)pc.positions[i][0], (float)pc.positions[i][1], (float)pc.positions[i][2]};
        f.write((const char*)xyz, 12);
        Color3 rgb = yuv_to_rgb({pc.colors[i][0], pc.colors[i][1], pc.colors[i][2]});
        uint8_t c[3];
        for (int k = 0; k < 3; ++k) c[k] = (uint8_t)std::llround(std::clamp(rgb[k], 0.0, 255.0));
        f.write((const char*)c, 3);
    }
    if (!f) fail(ErrorKind::IoError, "write failed for " + path);
}

}  // namespace pcac
