#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "stdepth/checkpoint.hpp"
#include "stdepth/io_util.hpp"
#include "stdepth/rng.hpp"

using namespace stdepth;

namespace {

std::string tmp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "stdepth_ckpt_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

NetworkParams make_trained_like_net() {
    auto net = build_network<float>(0.125, 7, 6.0f);
    // Push the running statistics off their initial values so their
    // persistence is actually observable.
    Rng rng(40);
    for (auto& l : net.layers) {
        if (!l.desc.bn) continue;
        for (auto& m : l.bn.running_mean.values()) m = static_cast<float>(rng.uniform(-1, 1));
        for (auto& v : l.bn.running_var.values()) v = static_cast<float>(rng.uniform(0.5, 2));
    }
    return net;
}

bool tensors_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (int64_t i = 0; i < a.numel(); ++i) {
        if (a.at(i) != b.at(i)) return false;
    }
    return true;
}

}  // namespace

TEST_SUITE_BEGIN("checkpoint");

TEST_CASE("roundtrip restores parameters, stats, and metadata bit for bit") {
    NetworkParams net = make_trained_like_net();
    CheckpointInfo info;
    info.arch = Arch::basic;
    info.sign = -1;
    info.epoch = 17;
    const std::string path = tmp_path("roundtrip.stdl");
    save_checkpoint(path, net, info);

    Checkpoint ck = load_checkpoint(path);
    CHECK(ck.info.arch == Arch::basic);
    CHECK(ck.info.sign == -1);
    CHECK(ck.info.epoch == 17);
    CHECK(ck.params.spec.scale == doctest::Approx(0.125));
    CHECK(ck.params.d_max == 6.0f);
    CHECK_FALSE(ck.opt.has_value());

    REQUIRE(ck.params.layers.size() == net.layers.size());
    for (size_t i = 0; i < net.layers.size(); ++i) {
        const auto& a = net.layers[i];
        const auto& b = ck.params.layers[i];
        CHECK(a.desc.name == b.desc.name);
        if (a.desc.kind != LayerKind::conv && a.desc.kind != LayerKind::deconv) continue;
        CHECK(tensors_equal(a.conv.weights, b.conv.weights));
        CHECK(tensors_equal(a.conv.bias, b.conv.bias));
        if (a.desc.bn) {
            CHECK(tensors_equal(a.bn.gamma, b.bn.gamma));
            CHECK(tensors_equal(a.bn.beta, b.bn.beta));
            CHECK(tensors_equal(a.bn.running_mean, b.bn.running_mean));
            CHECK(tensors_equal(a.bn.running_var, b.bn.running_var));
        }
    }
}

TEST_CASE("a reloaded network computes the identical map") {
    NetworkParams net = make_trained_like_net();
    const std::string path = tmp_path("forward.stdl");
    save_checkpoint(path, net, {});
    Checkpoint ck = load_checkpoint(path);

    Rng rng(9);
    Tensor x({1, 3, 32, 64});
    for (auto& v : x.values()) v = static_cast<float>(rng.uniform());
    DisparityMap a = forward_basic(net, x, BNMode::infer, +1);
    DisparityMap b = forward_basic(ck.params, x, BNMode::infer, +1);
    CHECK(tensors_equal(a.values, b.values));
}

TEST_CASE("optimizer state roundtrips and preserves the step counter") {
    NetworkParams net = make_trained_like_net();
    auto params = net.parameters();
    AdamState opt = AdamState::make(params);
    opt.t = 123;
    Rng rng(55);
    for (auto& m : opt.m) {
        for (auto& v : m.values()) v = static_cast<float>(rng.uniform(-1, 1));
    }
    for (auto& vv : opt.v) {
        for (auto& v : vv.values()) v = static_cast<float>(rng.uniform(0, 1));
    }
    const std::string path = tmp_path("opt.stdl");
    save_checkpoint(path, net, {}, &opt);

    Checkpoint ck = load_checkpoint(path);
    REQUIRE(ck.opt.has_value());
    CHECK(ck.opt->t == 123);
    CHECK(ck.opt->beta1 == opt.beta1);
    CHECK(ck.opt->beta2 == opt.beta2);
    CHECK(ck.opt->epsilon == opt.epsilon);
    REQUIRE(ck.opt->m.size() == opt.m.size());
    for (size_t i = 0; i < opt.m.size(); ++i) {
        CHECK(tensors_equal(ck.opt->m[i], opt.m[i]));
        CHECK(tensors_equal(ck.opt->v[i], opt.v[i]));
    }
}

TEST_CASE("save-load-save produces byte-identical files") {
    NetworkParams net = make_trained_like_net();
    auto params = net.parameters();
    AdamState opt = AdamState::make(params);
    opt.t = 9;
    const std::string p1 = tmp_path("bytes1.stdl");
    const std::string p2 = tmp_path("bytes2.stdl");
    CheckpointInfo info;
    info.epoch = 3;
    save_checkpoint(p1, net, info, &opt);
    Checkpoint ck = load_checkpoint(p1);
    REQUIRE(ck.opt.has_value());
    save_checkpoint(p2, ck.params, ck.info, &*ck.opt);
    CHECK(read_file(p1) == read_file(p2));
}

TEST_CASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(tmp_path("does_not_exist.stdl")), std::runtime_error);
}

TEST_CASE("bad magic is rejected") {
    const std::string path = tmp_path("magic.stdl");
    NetworkParams net = build_network<float>(0.125, 1, 6.0f);
    save_checkpoint(path, net, {});
    std::string bytes = read_file(path);
    bytes[0] = 'X';
    atomic_write_file(path, bytes);
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
}

TEST_CASE("unknown version is rejected") {
    const std::string path = tmp_path("version.stdl");
    NetworkParams net = build_network<float>(0.125, 1, 6.0f);
    save_checkpoint(path, net, {});
    std::string bytes = read_file(path);
    bytes[4] = 99;  // version little-endian low byte
    atomic_write_file(path, bytes);
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
}

TEST_CASE("truncation anywhere is rejected") {
    const std::string path = tmp_path("trunc.stdl");
    NetworkParams net = build_network<float>(0.125, 1, 6.0f);
    save_checkpoint(path, net, {});
    const std::string bytes = read_file(path);
    for (size_t keep : {size_t{3}, size_t{9}, size_t{100}, bytes.size() / 2, bytes.size() - 1}) {
        atomic_write_file(path, bytes.substr(0, keep));
        CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    }
}

TEST_CASE("trailing bytes are rejected") {
    const std::string path = tmp_path("trailing.stdl");
    NetworkParams net = build_network<float>(0.125, 1, 6.0f);
    save_checkpoint(path, net, {});
    atomic_write_file(path, read_file(path) + "junk");
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
}

TEST_SUITE_END();
