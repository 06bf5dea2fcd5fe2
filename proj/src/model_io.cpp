#include "hpdnet/model_io.hpp"

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "hpdnet/binary_io.hpp"
#include "hpdnet/errors.hpp"

namespace hpdnet {
namespace {

constexpr char kMagic[4] = {'R', 'C', 'M', 'M'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint32_t kTagStages = 0x434d4352;      // "RCMC"
constexpr std::uint32_t kTagKernels = 0x4e52454b;     // "KERN"
constexpr std::uint32_t kTagClassifier = 0x4d4e4e43;  // "CNNM"

// Little-endian growable buffer; sections are assembled in memory so their
// length prefix is known before anything reaches the file.
class ByteBuffer {
public:
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> bytes_;
};

void write_section(BinaryWriter& out, std::uint32_t tag, const ByteBuffer& payload) {
    out.u32(tag);
    out.u64(payload.bytes().size());
    if (!payload.bytes().empty()) out.raw(payload.bytes().data(), payload.bytes().size());
}

void check_class_ids(const std::vector<std::uint8_t>& ids, const std::string& path,
                     std::size_t offset) {
    if (ids.size() < 2) throw FormatError(path + ": model needs at least 2 classes", offset);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] == 0) throw FormatError(path + ": class id 0 is reserved", offset);
        if (i > 0 && ids[i] <= ids[i - 1])
            throw FormatError(path + ": class ids must be strictly ascending", offset);
    }
}

std::vector<std::vector<double>*> cnn_param_arrays(CnnModel& m) {
    std::vector<std::vector<double>*> out;
    for (ConvLayer& l : m.conv) {
        out.push_back(&l.w);
        out.push_back(&l.b);
    }
    out.push_back(&m.fc_w);
    out.push_back(&m.fc_b);
    out.push_back(&m.cls_w);
    return out;
}

std::vector<const std::vector<double>*> cnn_param_arrays(const CnnModel& m) {
    std::vector<const std::vector<double>*> out;
    for (const ConvLayer& l : m.conv) {
        out.push_back(&l.w);
        out.push_back(&l.b);
    }
    out.push_back(&m.fc_w);
    out.push_back(&m.fc_b);
    out.push_back(&m.cls_w);
    return out;
}

}  // namespace

void save_model(const Model& model, const std::string& path) {
    if (model.rcm_layers < 0) throw ConfigError("model: negative stage count");
    if (model.rcm_layers > 0 && model.bank.num_layers() != model.rcm_layers)
        throw ShapeError("model: kernel bank holds " + std::to_string(model.bank.num_layers()) +
                         " stages but the model declares " + std::to_string(model.rcm_layers));
    validate_cnn_config(model.cnn.cfg);

    BinaryWriter out(path);
    out.raw(kMagic, 4);
    out.u16(kVersion);
    out.u16(model.rcm_layers > 0 ? 3 : 2);

    {
        ByteBuffer b;
        b.u32(static_cast<std::uint32_t>(model.rcm_layers));
        b.f64(model.rcm_layers > 0 ? model.bank.epsilon : 0.0);
        b.u64(model.rcm_layers > 0 ? model.bank.sample_seed : 0);
        write_section(out, kTagStages, b);
    }

    if (model.rcm_layers > 0) {
        ByteBuffer b;
        const int classes = model.bank.num_classes();
        b.u32(static_cast<std::uint32_t>(model.bank.num_layers()));
        b.u32(static_cast<std::uint32_t>(classes));
        for (std::uint8_t id : model.bank.class_ids) b.u8(id);
        for (const auto& layer : model.bank.layers)
            for (const Matrix3c& w : layer)
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c) {
                        b.f64(w(r, c).real());
                        b.f64(w(r, c).imag());
                    }
        write_section(out, kTagKernels, b);
    }

    {
        ByteBuffer b;
        const CnnConfig& cfg = model.cnn.cfg;
        b.u32(static_cast<std::uint32_t>(cfg.patch_size));
        b.u32(static_cast<std::uint32_t>(cfg.kernel_sizes.size()));
        for (int k : cfg.kernel_sizes) b.u32(static_cast<std::uint32_t>(k));
        for (int c : cfg.channels) b.u32(static_cast<std::uint32_t>(c));
        b.u32(static_cast<std::uint32_t>(cfg.pool_after.size()));
        for (int p : cfg.pool_after) b.u32(static_cast<std::uint32_t>(p));
        b.u32(static_cast<std::uint32_t>(cfg.fc_width));
        b.f64(cfg.learning_rate);
        b.u32(static_cast<std::uint32_t>(cfg.iterations));
        b.u32(static_cast<std::uint32_t>(cfg.batch_size));
        b.f64(cfg.adam_beta1);
        b.f64(cfg.adam_beta2);
        b.f64(cfg.adam_epsilon);
        b.f64(cfg.sample_fraction);
        b.u64(cfg.seed);
        b.u32(static_cast<std::uint32_t>(model.cnn.input_dim));
        b.u32(static_cast<std::uint32_t>(model.cnn.class_ids.size()));
        for (std::uint8_t id : model.cnn.class_ids) b.u8(id);
        for (const std::vector<double>* arr : cnn_param_arrays(model.cnn))
            for (double v : *arr) b.f32(static_cast<float>(v));
        write_section(out, kTagClassifier, b);
    }
    out.close();
}

Model load_model(const std::string& path) {
    BinaryReader in(path);
    char magic[4];
    in.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(path + ": not a model file (bad magic)", 0);
    const std::uint16_t version = in.u16();
    if (version != kVersion)
        throw FormatError(path + ": unsupported model version " + std::to_string(version), 4);
    const std::uint16_t sections = in.u16();

    Model model;
    bool have_stages = false, have_kernels = false, have_classifier = false;

    for (std::uint16_t s = 0; s < sections; ++s) {
        const std::uint32_t tag = in.u32();
        const std::uint64_t length = in.u64();
        const std::size_t start = in.offset();

        if (tag == kTagStages) {
            if (have_stages) throw FormatError(path + ": duplicate stage section", start);
            have_stages = true;
            model.rcm_layers = static_cast<int>(in.u32());
            model.bank.epsilon = in.f64();
            model.bank.sample_seed = in.u64();
        } else if (tag == kTagKernels) {
            if (have_kernels) throw FormatError(path + ": duplicate kernel section", start);
            have_kernels = true;
            const std::uint32_t layers = in.u32();
            const std::uint32_t classes = in.u32();
            if (layers == 0 || layers > 64 || classes == 0 || classes > 255)
                throw FormatError(path + ": implausible kernel bank shape", start);
            model.bank.class_ids.resize(classes);
            for (std::uint32_t c = 0; c < classes; ++c) model.bank.class_ids[c] = in.u8();
            model.bank.layers.assign(layers, std::vector<Matrix3c>(classes));
            for (std::uint32_t l = 0; l < layers; ++l)
                for (std::uint32_t c = 0; c < classes; ++c) {
                    Matrix3c w;
                    for (int r = 0; r < 3; ++r)
                        for (int cc = 0; cc < 3; ++cc) {
                            const double re = in.f64();
                            const double im = in.f64();
                            w(r, cc) = Complex(re, im);
                        }
                    if (!is_finite(w))
                        throw FormatError(path + ": non-finite kernel entry", in.offset());
                    model.bank.layers[l][c] = w;
                }
        } else if (tag == kTagClassifier) {
            if (have_classifier) throw FormatError(path + ": duplicate classifier section", start);
            have_classifier = true;
            CnnConfig cfg;
            cfg.patch_size = static_cast<int>(in.u32());
            const std::uint32_t convs = in.u32();
            if (convs == 0 || convs > 64)
                throw FormatError(path + ": implausible conv stack depth", start);
            cfg.kernel_sizes.resize(convs);
            cfg.channels.resize(convs);
            for (auto& k : cfg.kernel_sizes) k = static_cast<int>(in.u32());
            for (auto& c : cfg.channels) c = static_cast<int>(in.u32());
            const std::uint32_t pools = in.u32();
            if (pools > convs) throw FormatError(path + ": more pools than conv layers", start);
            cfg.pool_after.resize(pools);
            for (auto& p : cfg.pool_after) p = static_cast<int>(in.u32());
            cfg.fc_width = static_cast<int>(in.u32());
            cfg.learning_rate = in.f64();
            cfg.iterations = static_cast<int>(in.u32());
            cfg.batch_size = static_cast<int>(in.u32());
            cfg.adam_beta1 = in.f64();
            cfg.adam_beta2 = in.f64();
            cfg.adam_epsilon = in.f64();
            cfg.sample_fraction = in.f64();
            cfg.seed = in.u64();
            const int input_dim = static_cast<int>(in.u32());
            const std::uint32_t classes = in.u32();
            if (classes == 0 || classes > 255)
                throw FormatError(path + ": implausible class count", start);
            std::vector<std::uint8_t> ids(classes);
            for (auto& id : ids) id = in.u8();
            if (input_dim < 1 || input_dim > 1 << 16)
                throw FormatError(path + ": implausible feature dimension", start);
            try {
                model.cnn = init_cnn(cfg, input_dim, ids);
            } catch (const Error& e) {
                throw FormatError(path + ": invalid classifier description: " + e.what(), start);
            }
            for (std::vector<double>* arr : cnn_param_arrays(model.cnn))
                for (double& v : *arr) {
                    v = static_cast<double>(in.f32());
                    if (!std::isfinite(v))
                        throw FormatError(path + ": non-finite network parameter", in.offset());
                }
        } else {
            in.skip(length);
        }
        if (in.offset() != start + length)
            throw FormatError(path + ": section length does not match its payload", start);
    }
    in.expect_eof();

    if (!have_stages) throw FormatError(path + ": missing stage section", in.offset());
    if (!have_classifier) throw FormatError(path + ": missing classifier section", in.offset());
    if (model.rcm_layers < 0 || model.rcm_layers > 64)
        throw FormatError(path + ": implausible stage count", in.offset());
    if (model.rcm_layers > 0) {
        if (!have_kernels) throw FormatError(path + ": missing kernel section", in.offset());
        if (model.bank.num_layers() != model.rcm_layers)
            throw FormatError(path + ": kernel bank stage count disagrees with the header",
                              in.offset());
        if (!(model.bank.epsilon > 0.0) || !std::isfinite(model.bank.epsilon))
            throw FormatError(path + ": rectification floor must be positive", in.offset());
        check_class_ids(model.bank.class_ids, path, in.offset());
        if (model.bank.class_ids != model.cnn.class_ids)
            throw FormatError(path + ": kernel bank and classifier disagree on classes",
                              in.offset());
        if (model.cnn.input_dim != 9 * model.bank.num_classes())
            throw FormatError(path + ": feature dimension does not match the kernel bank",
                              in.offset());
    } else {
        if (have_kernels)
            throw FormatError(path + ": kernel section present but no stages declared",
                              in.offset());
        if (model.cnn.input_dim != 9)
            throw FormatError(path + ": raw-feature models are 9-dimensional", in.offset());
    }
    check_class_ids(model.cnn.class_ids, path, in.offset());
    return model;
}

}  // namespace hpdnet
