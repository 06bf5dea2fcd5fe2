#include "hpdnet/polsar_data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "hpdnet/binary_io.hpp"
#include "hpdnet/kv.hpp"
#include "hpdnet/parallel.hpp"
#include "hpdnet/rng.hpp"

namespace hpdnet {

namespace {

constexpr std::uint16_t kFieldVersion = 1;
constexpr std::uint16_t kLabelVersion = 1;
constexpr std::size_t kFieldHeaderBytes = 22;   // magic+version+h+w+looks+flags
constexpr std::size_t kPixelBytes = 72;         // 18 float32
constexpr double kLoadingScale = 1e-6;          // x mean trace
constexpr double kHermitianFileTol = 1e-6;

// Fixed palette for rendered class maps; class 0 stays black.
constexpr std::uint8_t kPalette[][3] = {
    {230, 25, 75},  {60, 180, 75},   {0, 130, 200},  {255, 225, 25},
    {145, 30, 180}, {70, 240, 240},  {245, 130, 48}, {240, 50, 230},
    {210, 245, 60}, {250, 190, 212}, {0, 128, 128},  {220, 190, 255}};
constexpr int kPaletteSize = static_cast<int>(sizeof(kPalette) / sizeof(kPalette[0]));

void check_dims(long long height, long long width, const std::string& what) {
    if (height < 1 || width < 1) throw ShapeError(what + ": dimensions must be positive");
    if (height * width > (1ll << 28))
        throw ShapeError(what + ": grid of " + std::to_string(height) + "x" +
                         std::to_string(width) + " exceeds the supported size");
}

// Validates one dense pixel read from a file and converts it to HPD.
HpdMatrix3 pixel_from_dense(const Matrix3c& m, std::size_t pixel, std::size_t offset) {
    if (!is_finite(m))
        throw FormatError("pixel " + std::to_string(pixel) + " has non-finite entries", offset);
    double dev = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) dev = std::max(dev, std::abs(m(i, j) - std::conj(m(j, i))));
    if (dev > kHermitianFileTol)
        throw FormatError("pixel " + std::to_string(pixel) + " deviates from Hermitian by " +
                              std::to_string(dev),
                          offset);
    try {
        return HpdMatrix3(HermitianMatrix3::hermitian_part(m));
    } catch (const NotPositiveDefinite&) {
        throw FormatError("pixel " + std::to_string(pixel) + " is not positive definite", offset);
    }
}

// Diagonal loading, float32 quantization, HPD validation for a grid of raw
// Hermitian accumulations. Shared by the generator and the raster importer.
CoherencyField finalize_field(std::vector<HermitianMatrix3>& raw, int height, int width,
                              int looks) {
    const std::size_t n = raw.size();
    double trace_sum = 0.0;
    for (const HermitianMatrix3& m : raw) trace_sum += m.trace();
    const double delta = kLoadingScale * trace_sum / static_cast<double>(n);
    const HermitianMatrix3 load = HermitianMatrix3::from_diagonal(delta, delta, delta);

    std::vector<std::optional<HpdMatrix3>> pixels(n);
    parallel_for(n, [&](std::size_t p) {
        try {
            pixels[p].emplace(quantize_to_f32(raw[p] + load));
        } catch (const NotPositiveDefinite& e) {
            throw NotPositiveDefinite("pixel " + std::to_string(p) + ": " + e.what());
        }
    });

    CoherencyField field;
    field.height = height;
    field.width = width;
    field.looks = looks;
    field.pixels.reserve(n);
    for (std::optional<HpdMatrix3>& p : pixels) field.pixels.push_back(std::move(*p));
    return field;
}

void write_ppm(const std::string& path, int width, int height,
               const std::vector<std::uint8_t>& rgb) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "P6\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()),
              static_cast<std::streamsize>(rgb.size()));
    if (!out) throw IoError(path + ": write failed");
}

}  // namespace

LabelMap LabelMap::zeros(int height, int width) {
    check_dims(height, width, "label map");
    LabelMap m;
    m.height = height;
    m.width = width;
    m.labels.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 0);
    return m;
}

int LabelMap::max_label() const {
    int m = 0;
    for (std::uint8_t v : labels) m = std::max(m, static_cast<int>(v));
    return m;
}

PauliVector pauli_vector(const ScatteringMatrix& s) {
    if (!(std::isfinite(s.s_hh.real()) && std::isfinite(s.s_hh.imag()) &&
          std::isfinite(s.s_hv.real()) && std::isfinite(s.s_hv.imag()) &&
          std::isfinite(s.s_vv.real()) && std::isfinite(s.s_vv.imag())))
        throw InvalidMatrix("scattering matrix has non-finite entries");
    const double inv_sqrt2 = std::sqrt(0.5);
    PauliVector k;
    k[0] = inv_sqrt2 * (s.s_hh + s.s_vv);
    k[1] = inv_sqrt2 * (s.s_hh - s.s_vv);
    k[2] = inv_sqrt2 * (2.0 * s.s_hv);
    return k;
}

HermitianMatrix3 multilook_coherency(const std::vector<PauliVector>& ks, double loading) {
    if (ks.empty()) throw EmptyInput("multilook of an empty look list");
    if (!(loading >= 0.0)) throw InvalidMatrix("diagonal loading must be nonnegative");
    Matrix3c acc;
    for (const PauliVector& k : ks) {
        if (!is_finite(k)) throw InvalidMatrix("Pauli vector has non-finite entries");
        acc = acc + outer(k);
    }
    acc = Complex(1.0 / static_cast<double>(ks.size()), 0.0) * acc;
    HermitianMatrix3 t = HermitianMatrix3::hermitian_part(acc);
    t += HermitianMatrix3::from_diagonal(loading, loading, loading);
    return t;
}

HermitianMatrix3 quantize_to_f32(const HermitianMatrix3& m) {
    Matrix3c q;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const Complex z = m(i, j);
            q(i, j) = Complex(static_cast<double>(static_cast<float>(z.real())),
                              static_cast<double>(static_cast<float>(z.imag())));
        }
    return HermitianMatrix3::hermitian_part(q);
}

std::pair<CoherencyField, LabelMap> generate_synthetic_scene(const SyntheticSceneSpec& spec) {
    check_dims(spec.height, spec.width, "synthetic scene");
    if (spec.looks < 3)
        throw ConfigError("looks must be at least 3 for a valid 3x3 Wishart draw");
    if (spec.class_centers.empty()) throw ConfigError("scene needs at least one class center");
    const int C = static_cast<int>(spec.class_centers.size());
    const std::size_t n =
        static_cast<std::size_t>(spec.height) * static_cast<std::size_t>(spec.width);
    if (spec.layout.size() != n) throw ShapeError("layout size does not match the grid");
    for (std::uint8_t v : spec.layout)
        if (v < 1 || v > C)
            throw ConfigError("layout class id " + std::to_string(int(v)) +
                              " outside 1.." + std::to_string(C));

    std::vector<Matrix3c> chol;
    chol.reserve(spec.class_centers.size());
    for (const HpdMatrix3& center : spec.class_centers) chol.push_back(cholesky(center));

    const double inv_sqrt2 = std::sqrt(0.5);
    const double inv_looks = 1.0 / static_cast<double>(spec.looks);

    std::vector<HermitianMatrix3> raw(n);
    parallel_for(n, [&](std::size_t p) {
        // Counter-based stream: the pixel's draws depend only on (seed, p).
        Rng rng(substream_seed(spec.seed, p));
        const Matrix3c& l = chol[static_cast<std::size_t>(spec.layout[p] - 1)];
        Matrix3c acc;
        for (int look = 0; look < spec.looks; ++look) {
            double g[6];
            rng.next_normal_pair(g[0], g[1]);
            rng.next_normal_pair(g[2], g[3]);
            rng.next_normal_pair(g[4], g[5]);
            Vector3c z;
            z[0] = Complex(g[0] * inv_sqrt2, g[1] * inv_sqrt2);
            z[1] = Complex(g[2] * inv_sqrt2, g[3] * inv_sqrt2);
            z[2] = Complex(g[4] * inv_sqrt2, g[5] * inv_sqrt2);
            acc = acc + outer(l * z);
        }
        raw[p] = HermitianMatrix3::hermitian_part(Complex(inv_looks, 0.0) * acc);
    });

    CoherencyField field = finalize_field(raw, spec.height, spec.width, spec.looks);
    LabelMap labels = LabelMap::zeros(spec.height, spec.width);
    labels.labels.assign(spec.layout.begin(), spec.layout.end());
    return {std::move(field), std::move(labels)};
}

SyntheticSceneSpec parse_scene_spec(std::istream& in) {
    SyntheticSceneSpec spec;
    int classes = 0;
    std::string layout_kind = "stripes";
    std::vector<std::pair<int, KvEntry>> center_entries;  // class id -> entry

    for (const KvEntry& e : parse_kv(in)) {
        if (e.key == "height")
            spec.height = static_cast<int>(kv_int(e));
        else if (e.key == "width")
            spec.width = static_cast<int>(kv_int(e));
        else if (e.key == "looks")
            spec.looks = static_cast<int>(kv_int(e));
        else if (e.key == "seed")
            spec.seed = kv_u64(e);
        else if (e.key == "classes")
            classes = static_cast<int>(kv_int(e));
        else if (e.key == "layout")
            layout_kind = e.value;
        else if (e.key.rfind("center.", 0) == 0) {
            int id = 0;
            try {
                std::size_t used = 0;
                id = std::stoi(e.key.substr(7), &used);
                if (used != e.key.size() - 7) throw std::invalid_argument(e.key);
            } catch (const std::exception&) {
                throw ConfigError("bad center key \"" + e.key + "\"", e.line);
            }
            center_entries.emplace_back(id, e);
        } else {
            throw ConfigError("unknown key \"" + e.key + "\"", e.line);
        }
    }

    if (spec.height < 1 || spec.width < 1)
        throw ConfigError("scene needs positive height and width");
    if (classes < 1) throw ConfigError("scene needs a positive class count");
    if (static_cast<int>(center_entries.size()) != classes)
        throw ConfigError("expected " + std::to_string(classes) + " center lines, found " +
                          std::to_string(center_entries.size()));

    std::sort(center_entries.begin(), center_entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (int c = 0; c < classes; ++c) {
        const auto& [id, entry] = center_entries[static_cast<std::size_t>(c)];
        if (id != c + 1)
            throw ConfigError("center ids must be contiguous 1.." + std::to_string(classes),
                              entry.line);
        const std::vector<double> v = kv_doubles(entry);
        if (v.size() != 9)
            throw ConfigError(
                "center needs 9 reals: d1 d2 d3 re12 im12 re13 im13 re23 im23",
                entry.line);
        Matrix3c m;
        m(0, 0) = v[0];
        m(1, 1) = v[1];
        m(2, 2) = v[2];
        m(0, 1) = Complex(v[3], v[4]);
        m(0, 2) = Complex(v[5], v[6]);
        m(1, 2) = Complex(v[7], v[8]);
        m(1, 0) = std::conj(m(0, 1));
        m(2, 0) = std::conj(m(0, 2));
        m(2, 1) = std::conj(m(1, 2));
        try {
            spec.class_centers.emplace_back(HermitianMatrix3::from_entries(m));
        } catch (const Error& err) {
            throw ConfigError("class " + std::to_string(id) + " center: " + err.what(),
                              entry.line);
        }
    }

    const std::size_t n =
        static_cast<std::size_t>(spec.height) * static_cast<std::size_t>(spec.width);
    spec.layout.resize(n);
    if (layout_kind == "stripes") {
        // Vertical bands of equal width, class 1 leftmost.
        for (int i = 0; i < spec.height; ++i)
            for (int j = 0; j < spec.width; ++j) {
                const int c = std::min(classes - 1, (j * classes) / spec.width);
                spec.layout[static_cast<std::size_t>(i) * spec.width + j] =
                    static_cast<std::uint8_t>(c + 1);
            }
    } else if (layout_kind == "bands") {
        // Horizontal bands, class 1 topmost.
        for (int i = 0; i < spec.height; ++i) {
            const int c = std::min(classes - 1, (i * classes) / spec.height);
            for (int j = 0; j < spec.width; ++j)
                spec.layout[static_cast<std::size_t>(i) * spec.width + j] =
                    static_cast<std::uint8_t>(c + 1);
        }
    } else {
        throw ConfigError("unknown layout \"" + layout_kind + "\" (expected stripes or bands)");
    }
    return spec;
}

SyntheticSceneSpec parse_scene_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    return parse_scene_spec(in);
}

void save_field(const CoherencyField& field, const LabelMap* labels, const std::string& path) {
    check_dims(field.height, field.width, "field");
    if (field.pixels.size() != static_cast<std::size_t>(field.height) * field.width)
        throw ShapeError("field pixel count does not match its dimensions");
    if (labels != nullptr &&
        (labels->height != field.height || labels->width != field.width))
        throw ShapeError("label map dimensions do not match the field");

    BinaryWriter out(path);
    out.raw("HPD3", 4);
    out.u16(kFieldVersion);
    out.u32(static_cast<std::uint32_t>(field.height));
    out.u32(static_cast<std::uint32_t>(field.width));
    out.u32(static_cast<std::uint32_t>(field.looks));
    out.u32(labels != nullptr ? 1u : 0u);
    for (const HpdMatrix3& px : field.pixels)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const Complex z = px(i, j);
                out.f32(static_cast<float>(z.real()));
                out.f32(static_cast<float>(z.imag()));
            }
    if (labels != nullptr)
        for (std::uint8_t v : labels->labels) out.u8(v);
    out.close();
}

std::pair<CoherencyField, std::optional<LabelMap>> load_field(const std::string& path) {
    BinaryReader in(path);
    char magic[4];
    in.raw(magic, 4);
    if (std::string(magic, 4) != "HPD3")
        throw FormatError(path + ": bad magic (expected HPD3)", 0);
    const std::uint16_t version = in.u16();
    if (version != kFieldVersion)
        throw FormatError(path + ": unsupported version " + std::to_string(version), 4);
    const std::uint32_t height = in.u32();
    const std::uint32_t width = in.u32();
    const std::uint32_t looks = in.u32();
    const std::uint32_t flags = in.u32();
    check_dims(height, width, path);
    if (looks < 1) throw FormatError(path + ": looks must be positive", 14);
    if ((flags & ~1u) != 0)
        throw FormatError(path + ": unknown flags " + std::to_string(flags), 18);

    const std::size_t n = static_cast<std::size_t>(height) * width;
    std::vector<Matrix3c> dense(n);
    for (std::size_t p = 0; p < n; ++p) {
        Matrix3c& m = dense[p];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const double re = in.f32();
                const double im = in.f32();
                m(i, j) = Complex(re, im);
            }
    }

    std::optional<LabelMap> labels;
    if (flags & 1u) {
        LabelMap lm = LabelMap::zeros(static_cast<int>(height), static_cast<int>(width));
        in.raw(lm.labels.data(), n);
        labels = std::move(lm);
    }
    in.expect_eof();

    std::vector<std::optional<HpdMatrix3>> pixels(n);
    parallel_for(n, [&](std::size_t p) {
        pixels[p].emplace(pixel_from_dense(dense[p], p, kFieldHeaderBytes + p * kPixelBytes));
    });

    CoherencyField field;
    field.height = static_cast<int>(height);
    field.width = static_cast<int>(width);
    field.looks = static_cast<int>(looks);
    field.pixels.reserve(n);
    for (std::optional<HpdMatrix3>& p : pixels) field.pixels.push_back(std::move(*p));
    return {std::move(field), std::move(labels)};
}

void save_label_map(const LabelMap& map, const std::string& path) {
    check_dims(map.height, map.width, "label map");
    BinaryWriter out(path);
    out.raw("LMAP", 4);
    out.u16(kLabelVersion);
    out.u32(static_cast<std::uint32_t>(map.height));
    out.u32(static_cast<std::uint32_t>(map.width));
    for (std::uint8_t v : map.labels) out.u8(v);
    out.close();
}

LabelMap load_label_map(const std::string& path) {
    BinaryReader in(path);
    char magic[4];
    in.raw(magic, 4);
    if (std::string(magic, 4) != "LMAP")
        throw FormatError(path + ": bad magic (expected LMAP)", 0);
    const std::uint16_t version = in.u16();
    if (version != kLabelVersion)
        throw FormatError(path + ": unsupported version " + std::to_string(version), 4);
    const std::uint32_t height = in.u32();
    const std::uint32_t width = in.u32();
    check_dims(height, width, path);
    LabelMap map = LabelMap::zeros(static_cast<int>(height), static_cast<int>(width));
    in.raw(map.labels.data(), map.labels.size());
    in.expect_eof();
    return map;
}

std::pair<CoherencyField, std::optional<LabelMap>> import_raster_field(
    const std::string& manifest_path) {
    const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();

    int height = 0, width = 0, looks = 1;
    std::string plane_paths[9];
    std::string label_path;
    static const char* kPlaneKeys[9] = {"T11",    "T22",    "T33",    "T12_re", "T12_im",
                                        "T13_re", "T13_im", "T23_re", "T23_im"};

    for (const KvEntry& e : parse_kv_file(manifest_path)) {
        if (e.key == "height")
            height = static_cast<int>(kv_int(e));
        else if (e.key == "width")
            width = static_cast<int>(kv_int(e));
        else if (e.key == "looks")
            looks = static_cast<int>(kv_int(e));
        else if (e.key == "labels")
            label_path = (base / e.value).string();
        else {
            bool known = false;
            for (int k = 0; k < 9; ++k)
                if (e.key == kPlaneKeys[k]) {
                    plane_paths[k] = (base / e.value).string();
                    known = true;
                    break;
                }
            if (!known) throw ConfigError("unknown manifest key \"" + e.key + "\"", e.line);
        }
    }

    check_dims(height, width, manifest_path);
    if (looks < 1) throw ConfigError("looks must be positive");
    for (int k = 0; k < 9; ++k)
        if (plane_paths[k].empty())
            throw ConfigError(std::string("manifest is missing plane ") + kPlaneKeys[k]);

    const std::size_t n = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    std::vector<std::vector<double>> planes(9);
    for (int k = 0; k < 9; ++k) {
        BinaryReader in(plane_paths[k]);
        planes[static_cast<std::size_t>(k)].resize(n);
        for (std::size_t p = 0; p < n; ++p)
            planes[static_cast<std::size_t>(k)][p] = static_cast<double>(in.f32());
        in.expect_eof();
    }

    std::vector<HermitianMatrix3> raw(n);
    for (std::size_t p = 0; p < n; ++p) {
        Matrix3c m;
        m(0, 0) = planes[0][p];
        m(1, 1) = planes[1][p];
        m(2, 2) = planes[2][p];
        m(0, 1) = Complex(planes[3][p], planes[4][p]);
        m(0, 2) = Complex(planes[5][p], planes[6][p]);
        m(1, 2) = Complex(planes[7][p], planes[8][p]);
        m(1, 0) = std::conj(m(0, 1));
        m(2, 0) = std::conj(m(0, 2));
        m(2, 1) = std::conj(m(1, 2));
        if (!is_finite(m))
            throw FormatError("pixel " + std::to_string(p) + " has non-finite entries", p * 4);
        raw[p] = HermitianMatrix3::hermitian_part(m);
    }

    std::optional<LabelMap> labels;
    if (!label_path.empty()) {
        BinaryReader in(label_path);
        LabelMap lm = LabelMap::zeros(height, width);
        in.raw(lm.labels.data(), n);
        in.expect_eof();
        labels = std::move(lm);
    }

    CoherencyField field;
    try {
        field = finalize_field(raw, height, width, looks);
    } catch (const NotPositiveDefinite& e) {
        throw FormatError(std::string("imported data: ") + e.what(), 0);
    }
    return {std::move(field), std::move(labels)};
}

std::pair<CoherencyField, std::optional<LabelMap>> load_any_field(const std::string& path) {
    {
        std::ifstream probe(path, std::ios::binary);
        if (!probe) throw IoError("cannot open " + path + " for reading");
        char magic[4] = {0, 0, 0, 0};
        probe.read(magic, 4);
        if (probe.gcount() == 4 && std::string(magic, 4) == "HPD3") return load_field(path);
    }
    return import_raster_field(path);
}

void render_pauli_rgb(const CoherencyField& field, const std::string& path) {
    const std::size_t n = field.pixels.size();
    if (n == 0) throw EmptyInput("cannot render an empty field");
    // Channel sources: R = |HH-VV| power (T22), G = |HV| power (T33),
    // B = |HH+VV| power (T11).
    std::vector<double> db(3 * n);
    for (std::size_t p = 0; p < n; ++p) {
        const HpdMatrix3& t = field.pixels[p];
        db[3 * p + 0] = 10.0 * std::log10(std::max(t.matrix().diagonal(1), 1e-300));
        db[3 * p + 1] = 10.0 * std::log10(std::max(t.matrix().diagonal(2), 1e-300));
        db[3 * p + 2] = 10.0 * std::log10(std::max(t.matrix().diagonal(0), 1e-300));
    }
    double mn[3], mx[3];
    for (int c = 0; c < 3; ++c) {
        mn[c] = db[static_cast<std::size_t>(c)];
        mx[c] = db[static_cast<std::size_t>(c)];
    }
    for (std::size_t p = 0; p < n; ++p)
        for (int c = 0; c < 3; ++c) {
            mn[c] = std::min(mn[c], db[3 * p + static_cast<std::size_t>(c)]);
            mx[c] = std::max(mx[c], db[3 * p + static_cast<std::size_t>(c)]);
        }
    std::vector<std::uint8_t> rgb(3 * n);
    for (std::size_t p = 0; p < n; ++p)
        for (int c = 0; c < 3; ++c) {
            const std::size_t i = 3 * p + static_cast<std::size_t>(c);
            const double span = mx[c] - mn[c];
            const double v = span > 1e-12 ? (db[i] - mn[c]) / span : 0.0;
            rgb[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
    write_ppm(path, field.width, field.height, rgb);
}

void render_label_map(const LabelMap& map, const std::string& path) {
    const std::size_t n = map.labels.size();
    std::vector<std::uint8_t> rgb(3 * n, 0);
    for (std::size_t p = 0; p < n; ++p) {
        const int v = map.labels[p];
        if (v == 0) continue;
        const auto& color = kPalette[(v - 1) % kPaletteSize];
        rgb[3 * p + 0] = color[0];
        rgb[3 * p + 1] = color[1];
        rgb[3 * p + 2] = color[2];
    }
    write_ppm(path, map.width, map.height, rgb);
}

}  // namespace hpdnet
