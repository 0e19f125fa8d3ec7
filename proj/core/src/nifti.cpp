#include "voxatlas/nifti.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include <zlib.h>

#include "voxatlas/error.hpp"

namespace voxatlas {

namespace {

// NIfTI-1 datatype codes
constexpr std::int16_t DT_UINT8 = 2;
constexpr std::int16_t DT_INT16 = 4;
constexpr std::int16_t DT_INT32 = 8;
constexpr std::int16_t DT_FLOAT32 = 16;
constexpr std::int16_t DT_FLOAT64 = 64;
constexpr std::int16_t DT_UINT16 = 512;

#pragma pack(push, 1)
struct NiftiHeader {
    std::int32_t sizeof_hdr;     // must be 348
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1;
    float intent_p2;
    float intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max;
    float cal_min;
    float slice_duration;
    float toffset;
    std::int32_t glmax;
    std::int32_t glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code;
    std::int16_t sform_code;
    float quatern_b;
    float quatern_c;
    float quatern_d;
    float qoffset_x;
    float qoffset_y;
    float qoffset_z;
    float srow_x[4];
    float srow_y[4];
    float srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(NiftiHeader) == 348, "NIfTI-1 header must be 348 bytes");

template <typename T>
void swap_bytes(T& v) {
    auto* p = reinterpret_cast<unsigned char*>(&v);
    std::reverse(p, p + sizeof(T));
}

void swap_header(NiftiHeader& h) {
    swap_bytes(h.sizeof_hdr);
    swap_bytes(h.extents);
    swap_bytes(h.session_error);
    for (auto& d : h.dim) swap_bytes(d);
    swap_bytes(h.intent_p1);
    swap_bytes(h.intent_p2);
    swap_bytes(h.intent_p3);
    swap_bytes(h.intent_code);
    swap_bytes(h.datatype);
    swap_bytes(h.bitpix);
    swap_bytes(h.slice_start);
    for (auto& p : h.pixdim) swap_bytes(p);
    swap_bytes(h.vox_offset);
    swap_bytes(h.scl_slope);
    swap_bytes(h.scl_inter);
    swap_bytes(h.slice_end);
    swap_bytes(h.cal_max);
    swap_bytes(h.cal_min);
    swap_bytes(h.slice_duration);
    swap_bytes(h.toffset);
    swap_bytes(h.glmax);
    swap_bytes(h.glmin);
    swap_bytes(h.qform_code);
    swap_bytes(h.sform_code);
    swap_bytes(h.quatern_b);
    swap_bytes(h.quatern_c);
    swap_bytes(h.quatern_d);
    swap_bytes(h.qoffset_x);
    swap_bytes(h.qoffset_y);
    swap_bytes(h.qoffset_z);
    for (auto& v : h.srow_x) swap_bytes(v);
    for (auto& v : h.srow_y) swap_bytes(v);
    for (auto& v : h.srow_z) swap_bytes(v);
}

class GzReader {
public:
    explicit GzReader(const std::filesystem::path& path) : path_(path.string()) {
        file_ = gzopen(path_.c_str(), "rb");  // transparently reads plain files too
        if (!file_) fail(errc::io, "cannot open " + path_);
    }
    ~GzReader() {
        if (file_) gzclose(file_);
    }
    GzReader(const GzReader&) = delete;
    GzReader& operator=(const GzReader&) = delete;

    void read_exact(void* dst, std::size_t bytes) {
        std::size_t done = 0;
        auto* out = static_cast<unsigned char*>(dst);
        while (done < bytes) {
            const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(bytes - done, 1u << 30));
            const int got = gzread(file_, out + done, chunk);
            if (got <= 0) fail(errc::corrupt_file, path_ + ": truncated (wanted " + std::to_string(bytes) +
                                                       " bytes, got " + std::to_string(done) + ")");
            done += static_cast<std::size_t>(got);
        }
    }

    void skip(std::size_t bytes) {
        std::vector<unsigned char> scratch(std::min<std::size_t>(bytes, 4096));
        std::size_t left = bytes;
        while (left > 0) {
            const std::size_t chunk = std::min(left, scratch.size());
            read_exact(scratch.data(), chunk);
            left -= chunk;
        }
    }

private:
    std::string path_;
    gzFile file_ = nullptr;
};

class GzWriter {
public:
    GzWriter(const std::filesystem::path& path, bool compressed) : path_(path.string()) {
        // "T" stores bytes verbatim (no gzip wrapper) for plain .nii output
        file_ = gzopen(path_.c_str(), compressed ? "wb" : "wbT");
        if (!file_) fail(errc::io, "cannot open " + path_ + " for writing");
    }
    ~GzWriter() {
        if (file_) gzclose(file_);
    }
    GzWriter(const GzWriter&) = delete;
    GzWriter& operator=(const GzWriter&) = delete;

    void write(const void* src, std::size_t bytes) {
        const auto* in = static_cast<const unsigned char*>(src);
        std::size_t done = 0;
        while (done < bytes) {
            const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(bytes - done, 1u << 30));
            const int put = gzwrite(file_, in + done, chunk);
            if (put <= 0) fail(errc::io, path_ + ": write failed");
            done += static_cast<std::size_t>(put);
        }
    }

private:
    std::string path_;
    gzFile file_ = nullptr;
};

struct LoadedImage {
    Geometry geometry;
    std::vector<float> values;
};

Geometry geometry_from_header(const NiftiHeader& h, const std::string& path) {
    Geometry g;
    g.dims = {h.dim[1], h.dim[2], h.dim[3]};

    if (h.sform_code > 0) {
        Mat3 m;
        const float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) m(r, c) = rows[r][c];
        for (int c = 0; c < 3; ++c) {
            const double len = norm(m.column(c));
            if (!(len > 0.0)) fail(errc::format, path + ": degenerate sform column");
            g.spacing[c] = len;
            for (int r = 0; r < 3; ++r) m(r, c) /= len;
        }
        g.direction = m;
        g.origin = {h.srow_x[3], h.srow_y[3], h.srow_z[3]};
    } else if (h.qform_code > 0) {
        const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
        const double a2 = 1.0 - (b * b + c * c + d * d);
        const double a = a2 > 0.0 ? std::sqrt(a2) : 0.0;
        Mat3 r;
        r.m = {a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c),
               2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b),
               2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c};
        const double qfac = h.pixdim[0] < 0.0f ? -1.0 : 1.0;
        for (int row = 0; row < 3; ++row) r(row, 2) *= qfac;
        g.direction = r;
        g.spacing = {h.pixdim[1], h.pixdim[2], h.pixdim[3]};
        g.origin = {h.qoffset_x, h.qoffset_y, h.qoffset_z};
    } else {
        g.spacing = {h.pixdim[1], h.pixdim[2], h.pixdim[3]};
    }
    for (int a = 0; a < 3; ++a)
        if (!(g.spacing[a] > 0.0)) g.spacing[a] = 1.0;  // pixdim 0 is common in synthetic files
    try {
        g.validate();
    } catch (const Error& e) {
        fail(errc::format, path + ": " + e.what());
    }
    return g;
}

template <typename T>
std::vector<float> convert_voxels(GzReader& reader, std::size_t count, bool swap, float slope, float inter,
                                  const std::string&) {
    std::vector<T> raw(count);
    reader.read_exact(raw.data(), count * sizeof(T));
    std::vector<float> out(count);
    const bool rescale = slope != 0.0f && !(slope == 1.0f && inter == 0.0f);
    for (std::size_t i = 0; i < count; ++i) {
        T v = raw[i];
        if constexpr (sizeof(T) > 1) {
            if (swap) swap_bytes(v);
        }
        double x = static_cast<double>(v);
        if (rescale) x = x * slope + inter;
        out[i] = static_cast<float>(x);
    }
    return out;
}

LoadedImage load_image(const std::filesystem::path& path) {
    const std::string p = path.string();
    GzReader reader(path);

    NiftiHeader h{};
    reader.read_exact(&h, sizeof(h));

    bool swap = false;
    if (h.dim[0] < 1 || h.dim[0] > 7) {
        swap_header(h);
        swap = true;
        if (h.dim[0] < 1 || h.dim[0] > 7) fail(errc::format, p + ": not a NIfTI-1 file (bad dim[0])");
    }
    if (std::strncmp(h.magic, "n+1", 3) != 0 && std::strncmp(h.magic, "ni1", 3) != 0)
        fail(errc::format, p + ": bad NIfTI magic");
    if (std::strncmp(h.magic, "ni1", 3) == 0)
        fail(errc::unsupported_datatype, p + ": two-file (.hdr/.img) NIfTI pairs are not supported");
    if (h.sizeof_hdr != 348) fail(errc::format, p + ": sizeof_hdr != 348");
    if (h.dim[0] != 3 && !(h.dim[0] == 4 && h.dim[4] <= 1))
        fail(errc::unsupported_datatype, p + ": only 3D volumes are supported");
    for (int a = 1; a <= 3; ++a)
        if (h.dim[a] < 1) fail(errc::format, p + ": non-positive dim[" + std::to_string(a) + "]");

    LoadedImage img;
    img.geometry = geometry_from_header(h, p);
    const std::size_t count = img.geometry.voxel_count();

    const std::size_t offset = h.vox_offset >= 348.0f ? static_cast<std::size_t>(h.vox_offset) : 352;
    reader.skip(offset - sizeof(NiftiHeader));

    switch (h.datatype) {
        case DT_UINT8:
            img.values = convert_voxels<std::uint8_t>(reader, count, swap, h.scl_slope, h.scl_inter, p);
            break;
        case DT_INT16:
            img.values = convert_voxels<std::int16_t>(reader, count, swap, h.scl_slope, h.scl_inter, p);
            break;
        case DT_UINT16:
            img.values = convert_voxels<std::uint16_t>(reader, count, swap, h.scl_slope, h.scl_inter, p);
            break;
        case DT_INT32:
            img.values = convert_voxels<std::int32_t>(reader, count, swap, h.scl_slope, h.scl_inter, p);
            break;
        case DT_FLOAT32:
            img.values = convert_voxels<float>(reader, count, swap, h.scl_slope, h.scl_inter, p);
            break;
        case DT_FLOAT64:
            img.values = convert_voxels<double>(reader, count, swap, h.scl_slope, h.scl_inter, p);
            break;
        default:
            fail(errc::unsupported_datatype, p + ": unsupported datatype code " + std::to_string(h.datatype));
    }
    return img;
}

NiftiHeader make_header(const Geometry& g, std::int16_t datatype, std::int16_t bitpix) {
    NiftiHeader h{};
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = 3;
    h.dim[1] = static_cast<std::int16_t>(g.dims[0]);
    h.dim[2] = static_cast<std::int16_t>(g.dims[1]);
    h.dim[3] = static_cast<std::int16_t>(g.dims[2]);
    for (int a = 4; a < 8; ++a) h.dim[a] = 1;
    h.datatype = datatype;
    h.bitpix = bitpix;
    h.pixdim[0] = 1.0f;
    for (int a = 0; a < 3; ++a) h.pixdim[a + 1] = static_cast<float>(g.spacing[a]);
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.scl_inter = 0.0f;
    h.xyzt_units = 2;  // NIFTI_UNITS_MM
    h.sform_code = 1;
    h.qform_code = 0;
    for (int c = 0; c < 3; ++c) {
        h.srow_x[c] = static_cast<float>(g.direction(0, c) * g.spacing[c]);
        h.srow_y[c] = static_cast<float>(g.direction(1, c) * g.spacing[c]);
        h.srow_z[c] = static_cast<float>(g.direction(2, c) * g.spacing[c]);
    }
    h.srow_x[3] = static_cast<float>(g.origin.x);
    h.srow_y[3] = static_cast<float>(g.origin.y);
    h.srow_z[3] = static_cast<float>(g.origin.z);
    std::memcpy(h.magic, "n+1", 4);
    return h;
}

bool is_gz_path(const std::filesystem::path& path) {
    const std::string s = path.string();
    return s.size() > 3 && s.compare(s.size() - 3, 3, ".gz") == 0;
}

void write_image(const NiftiHeader& h, const void* voxels, std::size_t bytes, const std::filesystem::path& path) {
    GzWriter writer(path, is_gz_path(path));
    writer.write(&h, sizeof(h));
    const char ext[4] = {0, 0, 0, 0};  // no header extensions
    writer.write(ext, 4);
    writer.write(voxels, bytes);
}

}  // namespace

Volume read_volume(const std::filesystem::path& path) {
    LoadedImage img = load_image(path);
    Volume v(img.geometry, std::move(img.values));
    v.check_finite(path.string().c_str());
    return v;
}

LabelVolume read_labels(const std::filesystem::path& path) {
    LoadedImage img = load_image(path);
    std::vector<std::uint8_t> labels(img.values.size());
    for (std::size_t i = 0; i < img.values.size(); ++i) {
        const float v = img.values[i];
        if (v != std::floor(v) || v < 0.0f || v > 3.0f)
            fail(errc::label_domain,
                 path.string() + ": value " + std::to_string(v) + " is not a label in {0,1,2,3}");
        labels[i] = static_cast<std::uint8_t>(v);
    }
    return LabelVolume(img.geometry, std::move(labels));
}

void write_volume(const Volume& v, const std::filesystem::path& path) {
    const NiftiHeader h = make_header(v.geometry(), DT_FLOAT32, 32);
    write_image(h, v.data().data(), v.size() * sizeof(float), path);
}

void write_labels(const LabelVolume& labels, const std::filesystem::path& path) {
    const NiftiHeader h = make_header(labels.geometry(), DT_UINT8, 8);
    write_image(h, labels.data().data(), labels.size(), path);
}

}  // namespace voxatlas
