#include "stdepth/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "stdepth/io_util.hpp"

namespace stdepth {

namespace {

constexpr char kMagic[4] = {'S', 'T', 'D', 'L'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kDtypeF32 = 0;

void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32_data(std::string& out, const float* p, size_t n) {
    if constexpr (std::endian::native == std::endian::little) {
        out.append(reinterpret_cast<const char*>(p), n * sizeof(float));
    } else {
        for (size_t i = 0; i < n; ++i) {
            uint32_t u;
            std::memcpy(&u, &p[i], 4);
            put_u32(out, u);
        }
    }
}

void put_record(std::string& out, const std::string& name, const Tensor& t) {
    SD_REQUIRE(name.size() <= 0xffff, "checkpoint: tensor name too long: " << name);
    SD_REQUIRE(t.rank() <= 0xff, "checkpoint: tensor rank too large for " << name);
    put_u16(out, static_cast<uint16_t>(name.size()));
    out.append(name);
    out.push_back(static_cast<char>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) {
        SD_REQUIRE(t.dim(i) >= 0 && t.dim(i) <= 0xffffffffll,
                   "checkpoint: dimension out of range for " << name);
        put_u32(out, static_cast<uint32_t>(t.dim(i)));
    }
    out.push_back(static_cast<char>(kDtypeF32));
    put_f32_data(out, t.data(), static_cast<size_t>(t.numel()));
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    const std::string& path;

    void need(size_t n) const {
        SD_FAIL_IF(pos + n > buf.size(), "checkpoint " << path << ": truncated at byte " << pos);
    }
    uint8_t u8() {
        need(1);
        return static_cast<uint8_t>(buf[pos++]);
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint16_t>(static_cast<uint8_t>(buf[pos]) |
                                           (static_cast<uint8_t>(buf[pos + 1]) << 8));
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    std::vector<float> f32_data(size_t n) {
        need(n * sizeof(float));
        std::vector<float> v(n);
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(v.data(), buf.data() + pos, n * sizeof(float));
            pos += n * sizeof(float);
        } else {
            for (size_t i = 0; i < n; ++i) {
                uint32_t u = u32();
                std::memcpy(&v[i], &u, 4);
            }
        }
        return v;
    }
};

// Parsed records in file order, plus name lookup.
struct RecordSet {
    std::vector<std::pair<std::string, Tensor>> records;
    std::map<std::string, size_t> by_name;
    std::map<std::string, bool> consumed;
    const std::string& path;

    Tensor take(const std::string& name) {
        auto it = by_name.find(name);
        SD_FAIL_IF(it == by_name.end(), "checkpoint " << path << ": missing tensor " << name);
        consumed[name] = true;
        return records[it->second].second;
    }
    bool has(const std::string& name) const { return by_name.count(name) != 0; }

    Tensor take_shaped(const std::string& name, const Shape& want) {
        Tensor t = take(name);
        SD_FAIL_IF(t.shape() != want, "checkpoint " << path << ": tensor " << name << " has shape "
                                                    << shape_str(t.shape()) << ", expected "
                                                    << shape_str(want));
        return t;
    }
    float take_scalar(const std::string& name) {
        Tensor t = take(name);
        SD_FAIL_IF(t.numel() != 1, "checkpoint " << path << ": tensor " << name
                                                 << " should be a scalar");
        return t.at(0);
    }
};

void copy_into(Tensor& dst, const Tensor& src) { dst.values() = src.values(); }

}  // namespace

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const CheckpointInfo& info, const AdamState* opt) {
    SD_REQUIRE(info.sign == 1 || info.sign == -1,
               "save_checkpoint: sign must be +1 or -1, got " << info.sign);
    std::vector<std::pair<std::string, Tensor>> named;
    named.emplace_back("meta.scale", Tensor::scalar(static_cast<float>(params.spec.scale)));
    named.emplace_back("meta.d_max", Tensor::scalar(params.d_max));
    named.emplace_back("meta.arch", Tensor::scalar(info.arch == Arch::basic ? 0.0f : 1.0f));
    named.emplace_back("meta.sign", Tensor::scalar(static_cast<float>(info.sign)));
    named.emplace_back("meta.epoch", Tensor::scalar(static_cast<float>(info.epoch)));
    for (const NetLayer& l : params.layers) {
        if (l.desc.kind != LayerKind::conv && l.desc.kind != LayerKind::deconv) continue;
        named.emplace_back(l.desc.name + ".weight", l.conv.weights);
        named.emplace_back(l.desc.name + ".bias", l.conv.bias);
        if (l.desc.bn) {
            named.emplace_back(l.desc.name + ".bn.gamma", l.bn.gamma);
            named.emplace_back(l.desc.name + ".bn.beta", l.bn.beta);
            named.emplace_back(l.desc.name + ".bn.running_mean", l.bn.running_mean);
            named.emplace_back(l.desc.name + ".bn.running_var", l.bn.running_var);
        }
    }
    if (opt != nullptr) {
        const auto learnable = params.parameters();
        SD_REQUIRE(opt->m.size() == learnable.size(),
                   "save_checkpoint: optimizer state does not match the parameter list");
        named.emplace_back("adam.t", Tensor::scalar(static_cast<float>(opt->t)));
        named.emplace_back("adam.beta1", Tensor::scalar(opt->beta1));
        named.emplace_back("adam.beta2", Tensor::scalar(opt->beta2));
        named.emplace_back("adam.epsilon", Tensor::scalar(opt->epsilon));
        for (size_t i = 0; i < learnable.size(); ++i) {
            named.emplace_back(learnable[i].first + ".m", opt->m[i]);
            named.emplace_back(learnable[i].first + ".v", opt->v[i]);
        }
    }

    std::string buf;
    buf.append(kMagic, 4);
    put_u32(buf, kVersion);
    put_u32(buf, static_cast<uint32_t>(named.size()));
    for (const auto& [name, t] : named) put_record(buf, name, t);

    atomic_write_file(path, buf);
}

Checkpoint load_checkpoint(const std::string& path) {
    const std::string buf = read_file(path);
    Reader r{buf, 0, path};
    const std::string magic = r.bytes(4);
    SD_FAIL_IF(magic != std::string(kMagic, 4),
               "checkpoint " << path << ": bad magic (not a checkpoint file)");
    const uint32_t version = r.u32();
    SD_FAIL_IF(version != kVersion, "checkpoint " << path << ": unsupported format version "
                                                  << version << " (expected " << kVersion << ")");
    const uint32_t count = r.u32();

    RecordSet set{{}, {}, {}, path};
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t name_len = r.u16();
        std::string name = r.bytes(name_len);
        const uint8_t rank = r.u8();
        Shape shape;
        int64_t n = 1;
        for (uint8_t d = 0; d < rank; ++d) {
            shape.push_back(static_cast<int64_t>(r.u32()));
            n *= shape.back();
        }
        const uint8_t dtype = r.u8();
        SD_FAIL_IF(dtype != kDtypeF32, "checkpoint " << path << ": tensor " << name
                                                     << " has unsupported dtype tag "
                                                     << int(dtype));
        std::vector<float> data = r.f32_data(static_cast<size_t>(n));
        SD_FAIL_IF(set.by_name.count(name) != 0,
                   "checkpoint " << path << ": duplicate tensor " << name);
        set.by_name[name] = set.records.size();
        set.records.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    SD_FAIL_IF(r.pos != buf.size(), "checkpoint " << path << ": " << buf.size() - r.pos
                                                  << " trailing bytes after " << count
                                                  << " tensors");

    Checkpoint ck;
    const float scale = set.take_scalar("meta.scale");
    const float d_max = set.take_scalar("meta.d_max");
    const float arch_tag = set.take_scalar("meta.arch");
    const float sign = set.take_scalar("meta.sign");
    const float epoch = set.take_scalar("meta.epoch");
    SD_FAIL_IF(arch_tag != 0.0f && arch_tag != 1.0f,
               "checkpoint " << path << ": meta.arch must be 0 or 1");
    SD_FAIL_IF(sign != 1.0f && sign != -1.0f,
               "checkpoint " << path << ": meta.sign must be +1 or -1");
    ck.info.arch = arch_tag == 0.0f ? Arch::basic : Arch::siamese;
    ck.info.sign = static_cast<int>(sign);
    ck.info.epoch = static_cast<int>(epoch);

    ck.params = make_network_skeleton<float>(make_layer_spec(static_cast<double>(scale)), d_max);
    for (NetLayer& l : ck.params.layers) {
        if (l.desc.kind != LayerKind::conv && l.desc.kind != LayerKind::deconv) continue;
        copy_into(l.conv.weights,
                  set.take_shaped(l.desc.name + ".weight", l.conv.weights.shape()));
        copy_into(l.conv.bias, set.take_shaped(l.desc.name + ".bias", l.conv.bias.shape()));
        if (l.desc.bn) {
            copy_into(l.bn.gamma, set.take_shaped(l.desc.name + ".bn.gamma", l.bn.gamma.shape()));
            copy_into(l.bn.beta, set.take_shaped(l.desc.name + ".bn.beta", l.bn.beta.shape()));
            copy_into(l.bn.running_mean,
                      set.take_shaped(l.desc.name + ".bn.running_mean", l.bn.running_mean.shape()));
            copy_into(l.bn.running_var,
                      set.take_shaped(l.desc.name + ".bn.running_var", l.bn.running_var.shape()));
        }
    }

    if (set.has("adam.t")) {
        AdamState st = AdamState::make(ck.params.parameters());
        st.t = static_cast<int64_t>(set.take_scalar("adam.t"));
        st.beta1 = set.take_scalar("adam.beta1");
        st.beta2 = set.take_scalar("adam.beta2");
        st.epsilon = set.take_scalar("adam.epsilon");
        const auto learnable = ck.params.parameters();
        for (size_t i = 0; i < learnable.size(); ++i) {
            copy_into(st.m[i], set.take_shaped(learnable[i].first + ".m", st.m[i].shape()));
            copy_into(st.v[i], set.take_shaped(learnable[i].first + ".v", st.v[i].shape()));
        }
        ck.opt = std::move(st);
    }

    for (const auto& rec : set.records) {
        SD_FAIL_IF(!set.consumed[rec.first],
                   "checkpoint " << path << ": unexpected tensor " << rec.first);
    }
    return ck;
}

}  // namespace stdepth
