#include "dynamix/dataset.hpp"

#include "dynamix/errors.hpp"

#include <nlohmann/json.hpp>

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

void put_f32(std::ofstream& out, const std::vector<float>& v) {
    static_assert(sizeof(float) == 4);
    // this codebase targets little-endian hosts; payload is LE by contract
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * 4));
}

} // namespace

void write_dataset(const Corpus& corpus, const nlohmann::json& generation_params,
                   const std::string& path) {
    if (corpus.sequences.empty()) throw argument_error("cannot write empty corpus");
    const int n = corpus.sequences.front().rows;
    const int t_seq = corpus.sequences.front().cols;
    for (const auto& seq : corpus.sequences) {
        if (seq.rows != n || seq.cols != t_seq)
            throw argument_error("corpus sequences do not share N and T_seq");
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw format_error("cannot open for writing: " + path);
    out.write(kDatasetMagic, 8);
    put_u32(out, kDatasetVersion);
    put_u32(out, static_cast<std::uint32_t>(n));
    put_u32(out, static_cast<std::uint32_t>(t_seq));
    put_u32(out, static_cast<std::uint32_t>(corpus.sequences.size()));
    put_u32(out, static_cast<std::uint32_t>(corpus.context_length));
    put_u32(out, static_cast<std::uint32_t>(corpus.overlap));

    std::vector<float> buf(static_cast<std::size_t>(n) * t_seq);
    for (const auto& seq : corpus.sequences) {
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(seq.data[i]);
        put_f32(out, buf);
    }

    nlohmann::json trailer;
    trailer["provenance"] = corpus.provenance;
    trailer["generation"] = generation_params;
    if (!corpus.sequences.empty()) trailer["dt"] = corpus.sequences.front().dt;
    const std::string text = trailer.dump();
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw format_error("write failed: " + path);
}

LoadedDataset read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open: " + path);

    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kDatasetMagic, 8) != 0)
        throw format_error("bad dataset magic in " + path);
    const std::uint32_t version = get_u32(in, "version");
    if (version != kDatasetVersion)
        throw format_error("unsupported dataset version " + std::to_string(version));
    const std::uint32_t n = get_u32(in, "N");
    const std::uint32_t t_seq = get_u32(in, "T_seq");
    const std::uint32_t count = get_u32(in, "sequence count");
    const std::uint32_t t_c = get_u32(in, "T_C");
    const std::uint32_t overlap = get_u32(in, "overlap");
    if (n == 0 || t_seq == 0 || count == 0) throw format_error("degenerate dataset header");
    if (t_c >= t_seq || overlap > t_c) throw format_error("inconsistent window geometry");

    LoadedDataset loaded;
    loaded.corpus.context_length = static_cast<int>(t_c);
    loaded.corpus.overlap = static_cast<int>(overlap);
    loaded.corpus.sequences.reserve(count);

    std::vector<float> buf(static_cast<std::size_t>(n) * t_seq);
    for (std::uint32_t s = 0; s < count; ++s) {
        if (!in.read(reinterpret_cast<char*>(buf.data()),
                     static_cast<std::streamsize>(buf.size() * 4)))
            throw format_error("truncated payload in " + path);
        Trajectory traj(static_cast<int>(n), static_cast<int>(t_seq));
        for (std::size_t i = 0; i < buf.size(); ++i) traj.data[i] = buf[i];
        loaded.corpus.sequences.push_back(std::move(traj));
    }

    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!text.empty()) {
        loaded.trailer = nlohmann::json::parse(text, nullptr, false);
        if (loaded.trailer.is_discarded()) throw format_error("bad JSON trailer in " + path);
        if (loaded.trailer.contains("provenance"))
            loaded.corpus.provenance =
                loaded.trailer["provenance"].get<std::vector<std::string>>();
        if (loaded.trailer.contains("dt")) {
            const double dt = loaded.trailer["dt"].get<double>();
            for (auto& seq : loaded.corpus.sequences) seq.dt = dt;
        }
    }
    if (!loaded.corpus.provenance.empty() && loaded.corpus.provenance.size() != count)
        throw format_error("provenance length does not match sequence count");
    for (std::size_t s = 0; s < loaded.corpus.sequences.size(); ++s) {
        if (s < loaded.corpus.provenance.size())
            loaded.corpus.sequences[s].name = loaded.corpus.provenance[s];
    }
    return loaded;
}

} // namespace dynamix
