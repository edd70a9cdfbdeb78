#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ppgauth/errors.hpp"
#include "ppgauth/store.hpp"

using namespace ppgauth;
using namespace ppgauth::store;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

signal::PpgRecord record(std::size_t subject, double seconds, std::uint64_t seed) {
    return signal::synth_ppg(signal::default_registry(8)[subject], seconds, seed);
}

// Non-positive head weights make identical inputs the best possible match.
net::SiameseModel matcher() {
    net::SiameseModel m(net::ModelConfig::mini());
    for (auto& w : m.dense_weight().value.values) w = -std::abs(w);
    m.metadata["eer_threshold"] = 0.4;
    return m;
}

EnrollOptions at(std::uint64_t t) {
    EnrollOptions o;
    o.created_at = t;
    return o;
}

}  // namespace

TEST_SUITE("store") {

TEST_CASE("enrollment uses three consecutive segments of 12 s") {
    TempDir dir("ppgauth_store_enroll");
    TemplateStore st(dir.path);
    const auto model = matcher();
    const auto rec = record(0, 12.0, 1);
    REQUIRE(rec.size() == 3000);
    const auto t = enroll(st, "S01", rec, model, at(1700000000));
    CHECK(t.image.width == 299);
    CHECK(t.image.height == 299);
    CHECK(t.image.channels == 3);
    CHECK(t.image.provenance.segment_starts == std::array<std::size_t, 3>{0, 1000, 2000});
    CHECK(t.c_values == std::vector<double>{1.7, 1.7, 1.7});
    CHECK(t.model_hash == net::version_hash(model));

    auto shorter = rec;
    shorter.samples.pop_back();
    CHECK_THROWS_AS(enroll(st, "S02", shorter, model), InsufficientDataError);
    CHECK_FALSE(st.contains("S02"));
}

TEST_CASE("templates round-trip bit-identically") {
    TempDir dir("ppgauth_store_roundtrip");
    TemplateStore st(dir.path);
    const auto model = matcher();
    EnrollOptions o = at(42);
    o.mode = signal::PreprocessMode::Band01_8;
    o.params = {chaos01::PqParams{1.2, 0.0}, chaos01::PqParams{1.7, 0.0}, chaos01::PqParams{2.2, 0.0}};
    const auto t = enroll(st, "S03", record(2, 20.0, 3), model, o);
    const auto back = st.load("S03");
    CHECK(back == t);
    CHECK(back.image.data == t.image.data);
    CHECK(back.mode == signal::PreprocessMode::Band01_8);
    CHECK(back.c_values == std::vector<double>{1.2, 1.7, 2.2});
    CHECK(encode_template(back) == encode_template(t));

    const auto bytes = fs::file_size(st.path_for("S03"));
    CHECK(bytes == 4 + 2 + 2 + 3 + 8 + 1 + 1 + 3 * 8 + (4 + 6 + 299 * 299 * 3) + 32);
    for (const auto& e : fs::directory_iterator(dir.path)) CHECK(e.path().extension() == ".pqt");
}

TEST_CASE("enrolled and probe featurization share parameters") {
    TempDir dir("ppgauth_store_params");
    TemplateStore st(dir.path);
    EnrollOptions o = at(1);
    o.mode = signal::PreprocessMode::Raw;
    o.params = chaos01::channel_params({chaos01::CSchedule::Kind::Sweep});
    const auto rec = record(4, 12.0, 9);
    const auto t = enroll(st, "S05", rec, matcher(), o);
    const auto probe = protocol_image(rec, t.mode, t.params());
    CHECK(probe.same_pixels(t.image));
    for (std::size_t i = 0; i < 3; ++i) CHECK(t.params()[i].c == o.params[i].c);
}

TEST_CASE("duplicate enrollment needs overwrite") {
    TempDir dir("ppgauth_store_dup");
    TemplateStore st(dir.path);
    const auto model = matcher();
    enroll(st, "S01", record(0, 12.0, 1), model, at(1));
    CHECK_THROWS_AS(enroll(st, "S01", record(0, 12.0, 2), model, at(2)), ConflictError);
    auto o = at(3);
    o.overwrite = true;
    const auto t = enroll(st, "S01", record(0, 12.0, 2), model, o);
    CHECK(st.load("S01").created_at == 3);
    CHECK(st.load("S01").image.data == t.image.data);
}

TEST_CASE("verification decisions") {
    TempDir dir("ppgauth_store_verify");
    TemplateStore st(dir.path);
    const auto model = matcher();
    const auto rec = record(1, 12.0, 4);
    enroll(st, "S02", rec, model, at(1));

    const auto self = verify(st, "S02", rec, model);
    CHECK(self.threshold == 0.4);
    CHECK(self.score == doctest::Approx(net::sigmoid(model.dense_bias().value[0])));
    CHECK(self.score >= 0.0);
    CHECK(self.score <= 1.0);

    const auto other = verify(st, "S02", record(5, 12.0, 4), model);
    CHECK(other.score <= self.score);
    for (double th : {0.0, other.score, self.score, 0.999}) {
        const auto r = verify(st, "S02", record(5, 12.0, 4), model, th);
        CHECK((r.decision == Decision::Accept) == (r.score >= th));
        CHECK(r.threshold == th);
    }
    // Pure function of its inputs.
    CHECK(verify(st, "S02", rec, model).score == self.score);

    CHECK_THROWS_AS(verify(st, "S09", rec, model), NotEnrolledError);
    auto changed = matcher();
    changed.dense_bias().value[0] += 0.5f;
    CHECK_THROWS_AS(verify(st, "S02", rec, changed), VersionError);
    auto bare = matcher();
    bare.metadata = nlohmann::json::object();
    CHECK_THROWS_AS(verify(st, "S02", rec, bare), ConfigError);
    CHECK_NOTHROW(verify(st, "S02", rec, bare, 0.5));
}

TEST_CASE("identification ranks and breaks ties by id") {
    TempDir dir("ppgauth_store_identify");
    TemplateStore st(dir.path);
    const auto model = matcher();
    CHECK_THROWS_AS(identify(st, record(0, 12.0, 1), model), ParameterError);

    enroll(st, "S01", record(0, 12.0, 1), model, at(1));
    CHECK(identify(st, record(0, 12.0, 2), model).size() == 1);

    enroll(st, "zeta", record(3, 12.0, 1), model, at(1));
    enroll(st, "alpha", record(3, 12.0, 1), model, at(1));
    enroll(st, "S07", record(6, 12.0, 1), model, at(1));
    const auto ranked = identify(st, record(3, 12.0, 1), model);
    REQUIRE(ranked.size() == 4);
    for (std::size_t i = 1; i < ranked.size(); ++i) CHECK(ranked[i].second <= ranked[i - 1].second);
    CHECK(ranked[0].first == "alpha");
    CHECK(ranked[1].first == "zeta");
    CHECK(ranked[0].second == ranked[1].second);
}

TEST_CASE("subject ids are percent-encoded into file names") {
    CHECK(percent_encode("S01") == "S01");
    CHECK(percent_encode("a/b c") == "a%2Fb%20c");
    CHECK(percent_encode("x.y-z_~") == "x.y-z_~");
    CHECK(percent_encode("\xc3\xa9") == "%C3%A9");

    TempDir dir("ppgauth_store_names");
    TemplateStore st(dir.path);
    const auto model = matcher();
    enroll(st, "../a b", record(0, 12.0, 1), model, at(1));
    CHECK(fs::exists(dir.path / "..%2Fa%20b.pqt"));
    CHECK(st.load("../a b").subject_id == "../a b");
    CHECK_THROWS_AS(st.path_for(""), ParameterError);
}

TEST_CASE("corrupt template files are rejected with an offset") {
    TempDir dir("ppgauth_store_corrupt");
    TemplateStore st(dir.path);
    const auto t = enroll(st, "S01", record(0, 12.0, 1), matcher(), at(1));
    const auto good = encode_template(t);

    auto expect_offset = [](const std::vector<std::uint8_t>& bytes, std::uint64_t offset) {
        try {
            decode_template(bytes);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(e.offset() == offset);
        }
    };
    auto magic = good;
    magic[3] = '2';
    expect_offset(magic, 0);
    auto version = good;
    version[4] = 7;
    expect_offset(version, 4);
    auto mode = good;
    mode[4 + 2 + 2 + 3 + 8] = 9;
    expect_offset(mode, 19);
    auto truncated = good;
    truncated.resize(good.size() - 10);
    CHECK_THROWS_AS(decode_template(truncated), FormatError);
    auto trailing = good;
    trailing.push_back(0);
    expect_offset(trailing, good.size());

    const auto path = dir.path / "broken.pqt";
    {
        std::ofstream out(path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(good.data()), 100);
    }
    CHECK_THROWS_AS(load_template(path), FormatError);
}

}
