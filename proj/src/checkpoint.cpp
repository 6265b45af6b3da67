#include "dynamix/checkpoint.hpp"

#include "dynamix/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstring>
#include <fstream>

namespace dynamix {

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw format_error("truncated " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_blob(std::ofstream& out, const std::string& name, const std::vector<double>& data) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    std::vector<float> f(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) f[i] = static_cast<float>(data[i]);
    out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * 4));
}

struct Blob {
    std::string name;
    std::vector<double> data;
};

Blob get_blob(std::ifstream& in) {
    const std::uint32_t name_len = get_u32(in, "blob name length");
    if (name_len > 4096) throw format_error("implausible blob name length");
    Blob blob;
    blob.name.resize(name_len);
    if (!in.read(blob.name.data(), name_len)) throw format_error("truncated blob name");
    const std::uint32_t count = get_u32(in, "blob size");
    std::vector<float> f(count);
    if (!in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(count) * 4))
        throw format_error("truncated blob payload: " + blob.name);
    blob.data.assign(f.begin(), f.end());
    return blob;
}

} // namespace

void save_checkpoint(const DynaMixModel& model, const nlohmann::json& metadata,
                     const std::string& path) {
    const ModelConfig& cfg = model.cfg;
    nlohmann::json manifest;
    manifest["format"] = "DMXM1";
    manifest["n"] = cfg.n;
    manifest["m"] = cfg.m;
    manifest["p"] = cfg.p;
    manifest["j"] = cfg.j;
    manifest["cnn_channels"] = cfg.cnn_channels;
    manifest["cnn_kernel"] = cfg.cnn_kernel;
    manifest["mlp_hidden"] = cfg.mlp_hidden;
    manifest["attention_sign"] = cfg.attention_sign;
    manifest["metadata"] = metadata;
    const std::string text = manifest.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw format_error("cannot open for writing: " + path);
    out.write(kCheckpointMagic, 8);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));

    const std::uint32_t blob_count = static_cast<std::uint32_t>(model.experts.size()) * 3 + 11;
    put_u32(out, blob_count);
    for (std::size_t e = 0; e < model.experts.size(); ++e) {
        const std::string prefix = "expert" + std::to_string(e);
        put_blob(out, prefix + ".A", model.experts[e].a);
        put_blob(out, prefix + ".W", model.experts[e].w);
        put_blob(out, prefix + ".h", model.experts[e].h);
    }
    const GatingParams& gp = model.gating;
    put_blob(out, "cnn.conv", gp.conv);
    put_blob(out, "cnn.proj", gp.proj);
    put_blob(out, "gating.D", gp.d);
    put_blob(out, "gating.Sigma", gp.sigma_diag());
    put_blob(out, "gating.T_att", {gp.t_att});
    put_blob(out, "gating.T_exp", {gp.t_exp});
    put_blob(out, "mlp.W1", gp.mlp_w1);
    put_blob(out, "mlp.b1", gp.mlp_b1);
    put_blob(out, "mlp.W2", gp.mlp_w2);
    put_blob(out, "mlp.b2", gp.mlp_b2);
    put_blob(out, "latent_lift", model.latent_lift);
    if (!out) throw format_error("write failed: " + path);
}

LoadedModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open: " + path);

    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw format_error("bad checkpoint magic in " + path);
    const std::uint32_t version = get_u32(in, "version");
    if (version != kCheckpointVersion)
        throw format_error("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t manifest_len = get_u32(in, "manifest length");
    std::string text(manifest_len, '\0');
    if (!in.read(text.data(), manifest_len)) throw format_error("truncated manifest");
    nlohmann::json manifest = nlohmann::json::parse(text, nullptr, false);
    if (manifest.is_discarded()) throw format_error("bad manifest JSON in " + path);

    LoadedModel loaded;
    ModelConfig cfg;
    cfg.n = manifest.at("n").get<int>();
    cfg.m = manifest.at("m").get<int>();
    cfg.p = manifest.at("p").get<int>();
    cfg.j = manifest.at("j").get<int>();
    cfg.cnn_channels = manifest.at("cnn_channels").get<int>();
    cfg.cnn_kernel = manifest.at("cnn_kernel").get<int>();
    cfg.mlp_hidden = manifest.at("mlp_hidden").get<int>();
    cfg.attention_sign = manifest.at("attention_sign").get<int>();
    loaded.metadata = manifest.value("metadata", nlohmann::json::object());

    DynaMixModel& model = loaded.model;
    model.cfg = cfg;
    model.experts.resize(cfg.j);

    const std::uint32_t blob_count = get_u32(in, "blob count");
    const std::uint32_t expected = static_cast<std::uint32_t>(cfg.j) * 3 + 11;
    if (blob_count != expected)
        throw format_error("blob count " + std::to_string(blob_count) + " does not match manifest");

    auto expect = [&](const Blob& blob, const std::string& name, std::size_t size) {
        if (blob.name != name)
            throw format_error("expected blob '" + name + "', found '" + blob.name + "'");
        if (blob.data.size() != size)
            throw format_error("blob '" + name + "' has size " + std::to_string(blob.data.size()) +
                               ", manifest implies " + std::to_string(size));
    };

    const std::size_t m = static_cast<std::size_t>(cfg.m);
    const std::size_t n = static_cast<std::size_t>(cfg.n);
    for (int e = 0; e < cfg.j; ++e) {
        const std::string prefix = "expert" + std::to_string(e);
        Blob a = get_blob(in), w = get_blob(in), h = get_blob(in);
        expect(a, prefix + ".A", m);
        expect(w, prefix + ".W", m * m);
        expect(h, prefix + ".h", m);
        model.experts[e].a = std::move(a.data);
        model.experts[e].w = std::move(w.data);
        model.experts[e].h = std::move(h.data);
    }
    GatingParams& gp = model.gating;
    Blob blob = get_blob(in);
    expect(blob, "cnn.conv", static_cast<std::size_t>(cfg.cnn_channels) * n * cfg.cnn_kernel);
    gp.conv = std::move(blob.data);
    blob = get_blob(in);
    expect(blob, "cnn.proj", n * cfg.cnn_channels);
    gp.proj = std::move(blob.data);
    blob = get_blob(in);
    expect(blob, "gating.D", n * m);
    gp.d = std::move(blob.data);
    blob = get_blob(in);
    expect(blob, "gating.Sigma", n);
    gp.noise_scale.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (blob.data[i] < 0.0) throw format_error("Sigma entries must be >= 0");
        gp.noise_scale[i] = std::sqrt(blob.data[i]);
    }
    blob = get_blob(in);
    expect(blob, "gating.T_att", 1);
    gp.t_att = blob.data[0];
    blob = get_blob(in);
    expect(blob, "gating.T_exp", 1);
    gp.t_exp = blob.data[0];
    if (gp.t_att <= 0.0 || gp.t_exp <= 0.0) throw format_error("temperatures must be positive");
    blob = get_blob(in);
    expect(blob, "mlp.W1", static_cast<std::size_t>(cfg.mlp_hidden) * (n + m));
    gp.mlp_w1 = std::move(blob.data);
    blob = get_blob(in);
    expect(blob, "mlp.b1", cfg.mlp_hidden);
    gp.mlp_b1 = std::move(blob.data);
    blob = get_blob(in);
    expect(blob, "mlp.W2", static_cast<std::size_t>(cfg.j) * cfg.mlp_hidden);
    gp.mlp_w2 = std::move(blob.data);
    blob = get_blob(in);
    expect(blob, "mlp.b2", cfg.j);
    gp.mlp_b2 = std::move(blob.data);
    blob = get_blob(in);
    expect(blob, "latent_lift", (m - n) * n);
    model.latent_lift = std::move(blob.data);
    return loaded;
}

} // namespace dynamix
