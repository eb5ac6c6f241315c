#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <sstream>

#include "tofusion/config.hpp"
#include "tofusion/io.hpp"
#include "tofusion/rng.hpp"

using namespace tofusion;

namespace {

CameraRig demo_rig() {
    CameraRig rig;
    rig.itof.intrinsics = {80.0, 78.5, 40.0, 30.0, 80, 60};
    rig.itof.distortion = {};
    rig.rgb.intrinsics = {100.0, 99.0, 80.0, 60.0, 160, 120};
    rig.rgb.distortion = {0.05, -0.01, 0.001, 0.0005, -0.0002};
    rig.extrinsic = RigidTransform(Mat3::axis_angle({0, 1, 0}, 0.01), {0.06, 0.002, -0.001});
    return rig;
}

}  // namespace

TEST_CASE("DMAP round-trip preserves values and invalid pixels") {
    DepthMap d(13, 7);
    RandomStream rs(3);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 13; ++x)
            if (rs.uniform() < 0.75) d.at(x, y) = static_cast<float>(rs.uniform(0.01, 50.0));

    std::stringstream ss;
    write_dmap(ss, d);
    const DepthMap back = read_dmap(ss);
    REQUIRE(back.width() == 13);
    REQUIRE(back.height() == 7);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 13; ++x) {
            CHECK(back.valid(x, y) == d.valid(x, y));
            if (d.valid(x, y)) CHECK(back.at(x, y) == d.at(x, y));
        }

    // bytes themselves round-trip
    std::stringstream ss2;
    write_dmap(ss2, back);
    std::stringstream ss3;
    write_dmap(ss3, d);
    CHECK(ss2.str() == ss3.str());
}

TEST_CASE("DMAP on-disk invalid sentinel is the reserved bit pattern") {
    DepthMap d(1, 1);
    std::stringstream ss;
    write_dmap(ss, d);
    const std::string bytes = ss.str();
    REQUIRE(bytes.size() == 4 + 4 + 4 + 4);
    std::uint32_t u;
    std::memcpy(&u, bytes.data() + 12, 4);
    CHECK(u == 0x7FC00000u);
}

TEST_CASE("DMAP errors are distinct") {
    std::stringstream bad_magic("XMAPxxxxxxxxxxxx");
    CHECK_THROWS_AS(read_dmap(bad_magic), MagicError);

    DepthMap d(4, 4, 1.0f);
    std::stringstream ss;
    write_dmap(ss, d);
    const std::string full = ss.str();
    std::stringstream truncated(full.substr(0, full.size() - 3));
    CHECK_THROWS_AS(read_dmap(truncated), TruncationError);

    // width * height too large
    std::string huge = full;
    const std::uint32_t w = 0xFFFFFFu, h = 0xFFFFFFu;
    std::memcpy(huge.data() + 4, &w, 4);
    std::memcpy(huge.data() + 8, &h, 4);
    std::stringstream shuge(huge);
    CHECK_THROWS_AS(read_dmap(shuge), DimensionError);

    // non-positive depth value
    std::string nonpos = full;
    const float neg = -1.0f;
    std::memcpy(nonpos.data() + 12, &neg, 4);
    std::stringstream snp(nonpos);
    CHECK_THROWS_AS(read_dmap(snp), FormatError);
}

TEST_CASE("PPM round-trip within quantization") {
    RgbImage img(9, 5);
    RandomStream rs(5);
    for (auto& v : img.values()) v = static_cast<float>(rs.uniform());
    std::stringstream ss;
    write_ppm(ss, img);
    const RgbImage back = read_ppm(ss);
    REQUIRE(back.width() == 9);
    REQUIRE(back.height() == 5);
    for (size_t i = 0; i < img.values().size(); ++i)
        CHECK(std::abs(back.values()[i] - img.values()[i]) <= 0.5f / 255.0f + 1e-6f);

    // 8-bit data round-trips exactly
    std::stringstream ss2;
    write_ppm(ss2, back);
    const RgbImage back2 = read_ppm(ss2);
    CHECK(back.values() == back2.values());
}

TEST_CASE("PPM rejects bad magic and truncation") {
    std::stringstream bad("P5\n2 2\n255\nxxxx");
    CHECK_THROWS_AS(read_ppm(bad), MagicError);
    std::stringstream trunc("P6\n4 4\n255\nxx");
    CHECK_THROWS_AS(read_ppm(trunc), TruncationError);
}

TEST_CASE("calibration JSON round-trip") {
    const CameraRig rig = demo_rig();
    const nlohmann::json j = rig_to_json(rig);
    const CameraRig back = rig_from_json(j);
    CHECK(back.itof.intrinsics.fx == rig.itof.intrinsics.fx);
    CHECK(back.rgb.distortion.k1 == rig.rgb.distortion.k1);
    CHECK(back.rgb.distortion.k3 == rig.rgb.distortion.k3);
    for (int i = 0; i < 9; ++i)
        CHECK(back.extrinsic.r.m[static_cast<size_t>(i)] == rig.extrinsic.r.m[static_cast<size_t>(i)]);
}

TEST_CASE("calibration rejects a non-orthonormal rotation, naming the matrix") {
    nlohmann::json j = rig_to_json(demo_rig());
    j["extrinsic"]["R"] = {1.0, 0.0, 0.0, 0.0, 1.1, 0.0, 0.0, 0.0, 1.0};
    try {
        rig_from_json(j);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("extrinsic.R") != std::string::npos);
    }
}

TEST_CASE("calibration rejects malformed camera blocks") {
    nlohmann::json j = rig_to_json(demo_rig());
    j["rgb"].erase("fx");
    CHECK_THROWS_AS(rig_from_json(j), FormatError);

    nlohmann::json j2 = rig_to_json(demo_rig());
    j2["itof"]["dist"] = {0.0, 0.0};
    CHECK_THROWS_AS(rig_from_json(j2), FormatError);
}

TEST_CASE("checkpoint save/load/save is byte-identical") {
    Checkpoint ck;
    ck.config_hash = 0x123456789abcdef0ull;
    ck.epoch = 17;
    RandomStream rs(9);
    for (int e = 0; e < 5; ++e) {
        CheckpointEntry entry;
        entry.name = "param." + std::to_string(e);
        entry.dims = {2, 3, 1, static_cast<std::uint32_t>(e + 1)};
        entry.data.resize(6 * static_cast<size_t>(e + 1));
        for (auto& v : entry.data) v = static_cast<float>(rs.gaussian());
        ck.entries.push_back(std::move(entry));
    }

    std::stringstream s1;
    write_checkpoint(s1, ck);
    const Checkpoint mid = read_checkpoint(s1);
    std::stringstream s2;
    write_checkpoint(s2, mid);
    CHECK(s1.str() == s2.str());
    CHECK(mid.config_hash == ck.config_hash);
    CHECK(mid.epoch == 17);
    REQUIRE(mid.find("param.3") != nullptr);
    CHECK(mid.find("param.3")->data == ck.entries[3].data);
}

TEST_CASE("checkpoint errors are distinct") {
    std::stringstream bad("XKPTxxxxxxxxxxxxxxxx");
    CHECK_THROWS_AS(read_checkpoint(bad), MagicError);

    Checkpoint ck;
    CheckpointEntry e;
    e.name = "w";
    e.dims = {4};
    e.data = {1, 2, 3, 4};
    ck.entries.push_back(e);
    std::stringstream ss;
    write_checkpoint(ss, ck);
    const std::string full = ss.str();
    std::stringstream trunc(full.substr(0, full.size() - 2));
    CHECK_THROWS_AS(read_checkpoint(trunc), TruncationError);
}

TEST_CASE("pipeline config JSON round-trip and hash stability") {
    PipelineConfig c;
    c.rig = demo_rig();
    c.seed = 99;
    c.dataset.num_scenes = 8;
    c.epochs = 3;
    c.validate();

    const nlohmann::json j = config_to_json(c);
    const PipelineConfig back = config_from_json(j);
    CHECK(config_hash(back) == config_hash(c));
    CHECK(back.optimizer.kind == "radam");
    CHECK(back.net.d_max == c.dataset.d_max);

    nlohmann::json j2 = config_to_json(c);
    j2["epochs"] = 4;
    CHECK(config_hash(config_from_json(j2)) != config_hash(c));
}

TEST_CASE("pipeline config validation failures") {
    PipelineConfig c;
    c.rig = demo_rig();
    nlohmann::json j = config_to_json(c);
    j["dataset"]["train_split"] = 1.5;
    CHECK_THROWS_AS(config_from_json(j), FormatError);

    nlohmann::json j2 = config_to_json(c);
    j2["optimizer"]["lr"] = -1.0;
    CHECK_THROWS_AS(config_from_json(j2), FormatError);

    nlohmann::json j3 = config_to_json(c);
    j3["epochs"] = 0;
    CHECK_THROWS_AS(config_from_json(j3), FormatError);
}
