#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dynamix/checkpoint.hpp"
#include "dynamix/dataset.hpp"
#include "dynamix/errors.hpp"
#include "dynamix/model.hpp"
#include "dynamix/systems.hpp"
#include "dynamix/trajectory.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>

using namespace dynamix;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void corrupt_first_byte(const std::string& path) {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    REQUIRE(f);
    char c;
    f.read(&c, 1);
    c ^= 0x5a;
    f.seekp(0);
    f.write(&c, 1);
}

Corpus small_corpus() {
    CorpusParams params;
    params.systems = {"lorenz63", "selkov"};
    params.sequences_per_system = 2;
    params.t_seq = 40;
    params.t_c = 30;
    params.overlap = 5;
    params.seed = 17;
    return generate_corpus(params);
}

} // namespace

TEST_CASE("dataset write -> read -> write is byte-identical") {
    const Corpus corpus = small_corpus();
    nlohmann::json gen;
    gen["seed"] = 17;
    gen["note"] = "roundtrip";

    const std::string p1 = "tmp_roundtrip_a.dmx";
    const std::string p2 = "tmp_roundtrip_b.dmx";
    write_dataset(corpus, gen, p1);
    LoadedDataset loaded = read_dataset(p1);
    CHECK(loaded.corpus.sequences.size() == corpus.sequences.size());
    CHECK(loaded.corpus.context_length == corpus.context_length);
    CHECK(loaded.corpus.overlap == corpus.overlap);
    CHECK(loaded.corpus.provenance == corpus.provenance);

    write_dataset(loaded.corpus, loaded.trailer["generation"], p2);
    CHECK(slurp(p1) == slurp(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("dataset payload survives the float32 narrowing on reload") {
    const Corpus corpus = small_corpus();
    const std::string p = "tmp_narrow.dmx";
    write_dataset(corpus, nlohmann::json::object(), p);
    LoadedDataset loaded = read_dataset(p);
    for (std::size_t s = 0; s < corpus.sequences.size(); ++s) {
        for (std::size_t i = 0; i < corpus.sequences[s].data.size(); ++i) {
            const float narrowed = static_cast<float>(corpus.sequences[s].data[i]);
            CHECK(loaded.corpus.sequences[s].data[i] == static_cast<double>(narrowed));
        }
    }
    std::remove(p.c_str());
}

TEST_CASE("corrupted dataset magic is rejected before any parsing") {
    const Corpus corpus = small_corpus();
    const std::string p = "tmp_corrupt.dmx";
    write_dataset(corpus, nlohmann::json::object(), p);
    corrupt_first_byte(p);
    CHECK_THROWS_AS(read_dataset(p), format_error);
    std::remove(p.c_str());
}

TEST_CASE("checkpoint write -> read -> write is byte-identical") {
    ModelConfig cfg;
    cfg.n = 3;
    const DynaMixModel model = init_model(cfg, 2025);
    nlohmann::json meta;
    meta["tool_version"] = "test";
    meta["seed"] = 2025;

    const std::string p1 = "tmp_model_a.dmxm";
    const std::string p2 = "tmp_model_b.dmxm";
    save_checkpoint(model, meta, p1);
    LoadedModel loaded = load_checkpoint(p1);
    CHECK(loaded.model.cfg.j == cfg.j);
    CHECK(loaded.model.cfg.attention_sign == cfg.attention_sign);
    CHECK(loaded.metadata["seed"] == 2025);

    save_checkpoint(loaded.model, loaded.metadata, p2);
    CHECK(slurp(p1) == slurp(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("corrupted checkpoint magic is rejected") {
    ModelConfig cfg;
    const DynaMixModel model = init_model(cfg, 1);
    const std::string p = "tmp_model_corrupt.dmxm";
    save_checkpoint(model, nlohmann::json::object(), p);
    corrupt_first_byte(p);
    CHECK_THROWS_AS(load_checkpoint(p), format_error);
    std::remove(p.c_str());
}

TEST_CASE("checkpoint loading validates blob shapes against the manifest") {
    ModelConfig cfg;
    cfg.n = 3;
    const DynaMixModel model = init_model(cfg, 4);
    const std::string p = "tmp_model_shape.dmxm";
    save_checkpoint(model, nlohmann::json::object(), p);

    // shrink the declared latent dimension: every expert blob now mismatches
    std::string bytes = slurp(p);
    const auto pos = bytes.find("\"m\":20");
    REQUIRE(pos != std::string::npos);
    bytes.replace(pos, 6, "\"m\":21");
    {
        std::ofstream out(p, std::ios::binary);
        out << bytes;
    }
    CHECK_THROWS_AS(load_checkpoint(p), format_error);
    std::remove(p.c_str());
}

TEST_CASE("trajectory csv round trip") {
    Trajectory traj(3, 7, 0.05, "roundtrip");
    for (std::size_t i = 0; i < traj.data.size(); ++i)
        traj.data[i] = std::sin(static_cast<double>(i)) * 1e3;
    const std::string p = "tmp_traj.csv";
    write_trajectory_csv(traj, p);
    const Trajectory back = read_trajectory_csv(p);
    REQUIRE(back.rows == 3);
    REQUIRE(back.cols == 7);
    for (std::size_t i = 0; i < traj.data.size(); ++i) CHECK(back.data[i] == traj.data[i]);
    std::remove(p.c_str());
}
