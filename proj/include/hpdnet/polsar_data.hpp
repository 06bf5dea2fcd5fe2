#ifndef HPDNET_POLSAR_DATA_HPP
#define HPDNET_POLSAR_DATA_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hpdnet/hpd_core.hpp"

namespace hpdnet {

// -----------------------------------------------------------------------------
// Domain types
// -----------------------------------------------------------------------------

// Monostatic scattering matrix (reciprocity s_hv = s_vh assumed).
struct ScatteringMatrix {
    Complex s_hh, s_hv, s_vv;
};

// Pauli-basis target vector.
using PauliVector = Vector3c;

// Per-pixel grid of coherency matrices, row-major.
struct CoherencyField {
    int height = 0;
    int width = 0;
    int looks = 1;
    std::vector<HpdMatrix3> pixels;

    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(j);
    }
    const HpdMatrix3& at(int i, int j) const { return pixels[index(i, j)]; }
    std::size_t size() const { return pixels.size(); }
};

// Class-id grid paired with a CoherencyField. 0 marks unlabeled pixels.
struct LabelMap {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> labels;

    static LabelMap zeros(int height, int width);

    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(j);
    }
    int at(int i, int j) const { return labels[index(i, j)]; }
    void set(int i, int j, int v) { labels[index(i, j)] = static_cast<std::uint8_t>(v); }

    // Largest class id present (0 for an all-unlabeled map).
    int max_label() const;
};

// Description of a synthetic complex-Wishart scene: per-class HPD centers and
// a class layout over the grid.
struct SyntheticSceneSpec {
    int height = 0;
    int width = 0;
    int looks = 4;
    std::uint64_t seed = 0;
    std::vector<HpdMatrix3> class_centers;  // index c -> class id c+1
    std::vector<std::uint8_t> layout;       // row-major class ids in 1..C
};

// -----------------------------------------------------------------------------
// Construction (Pauli decomposition and multi-looking)
// -----------------------------------------------------------------------------

// k = (1/sqrt 2) [s_hh + s_vv, s_hh - s_vv, 2 s_hv]^T.
PauliVector pauli_vector(const ScatteringMatrix& s);

// (1/N) sum k_i k_i^H + loading * I. PSD by construction; positive definite
// whenever loading > 0 (or N >= 3 generic looks), but rank deficiency with
// zero loading is representable, hence the Hermitian return type.
HermitianMatrix3 multilook_coherency(const std::vector<PauliVector>& ks, double loading);

// Rounds every stored component through float32. Fields are persisted at
// float32 precision, so keeping in-memory values at that precision makes the
// save/load round trip bitwise lossless.
HermitianMatrix3 quantize_to_f32(const HermitianMatrix3& m);

// Draws each pixel of class c as (1/N) * W, W ~ complex Wishart(N, center_c),
// via N Cholesky-colored Gaussian Pauli vectors. Per-pixel counter-based RNG:
// parallel and serial generation agree bitwise. Diagonal loading of
// 1e-6 x mean field trace keeps low-look pixels positive definite.
std::pair<CoherencyField, LabelMap> generate_synthetic_scene(const SyntheticSceneSpec& spec);

// Parses the `key = value` scene description (see README for the format).
SyntheticSceneSpec parse_scene_spec(std::istream& in);
SyntheticSceneSpec parse_scene_spec_file(const std::string& path);

// -----------------------------------------------------------------------------
// Persistence
// -----------------------------------------------------------------------------

// Binary coherency-field container; optionally carries the label map.
void save_field(const CoherencyField& field, const LabelMap* labels, const std::string& path);
std::pair<CoherencyField, std::optional<LabelMap>> load_field(const std::string& path);

void save_label_map(const LabelMap& map, const std::string& path);
LabelMap load_label_map(const std::string& path);

// Imports the per-channel raster layout (nine float32 planes plus optional
// u8 label plane) described by a `key = path` manifest file.
std::pair<CoherencyField, std::optional<LabelMap>> import_raster_field(
    const std::string& manifest_path);

// Dispatches on content: HPD3 container or raster manifest.
std::pair<CoherencyField, std::optional<LabelMap>> load_any_field(const std::string& path);

// -----------------------------------------------------------------------------
// Rendering
// -----------------------------------------------------------------------------

// False-color composite: diagonal powers (T22, T33, T11) in dB, min-max
// scaled per channel, written as a binary portable pixmap (P6).
void render_pauli_rgb(const CoherencyField& field, const std::string& path);

// Class map with a fixed palette by class id (0 renders black).
void render_label_map(const LabelMap& map, const std::string& path);

}  // namespace hpdnet

#endif  // HPDNET_POLSAR_DATA_HPP
