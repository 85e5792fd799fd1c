#include "srnnpb/checkpoint.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>

using namespace srnnpb;
namespace fs = std::filesystem;

namespace {

Checkpoint sample_checkpoint() {
    ModelConfig mc;
    mc.input_dim = 3;
    mc.pb_dim = 2;
    mc.hidden_dim = 5;
    RngStream rng(3, 0);
    Checkpoint ck;
    ck.params = init_params(mc, 2, rng);
    for (double& v : ck.params.pb_log_sigma().values()) v = rng.uniform(-3, 0);
    ck.params.values()[0] = 0.1;  // not exactly representable in decimal
    ck.params.values()[1] = -0.0;
    ck.normalization = {NormalizationMode::zscore, {0.1, 0.2, 0.3}, {1.5, 2.5, 3.5}};
    ck.sequence_names = {"a", "b"};
    ck.sequence_lengths = {10, 12};
    ck.columns = {"x", "y", "z"};
    ck.provenance = {42, 100, 0.01, {0.5, 0.25, 0.50025}};
    return ck;
}

std::string read_all(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

// Rewrites the JSON header of a saved checkpoint.
void edit_header(const fs::path& p, const std::function<void(nlohmann::json&)>& edit) {
    const std::string blob = read_all(p);
    std::uint64_t len = 0;
    std::memcpy(&len, blob.data() + 8, 8);
    auto header = nlohmann::json::parse(blob.substr(16, len));
    edit(header);
    const std::string text = header.dump();
    std::uint64_t new_len = text.size();
    std::string out = blob.substr(0, 8);
    out.append(reinterpret_cast<const char*>(&new_len), 8);
    out += text;
    out += blob.substr(16 + len);
    write_all(p, out);
}

CheckpointError::Kind load_error(const fs::path& p) {
    try {
        load_checkpoint(p);
    } catch (const CheckpointError& e) {
        return e.kind();
    }
    FAIL("checkpoint loaded");
    return CheckpointError::Kind::io;
}

struct Scratch {
    fs::path dir = fs::temp_directory_path() / "srnnpb-checkpoint-test";
    Scratch() {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("round trip is bitwise lossless") {
    Scratch s;
    const Checkpoint ck = sample_checkpoint();
    save_checkpoint(ck, s.dir / "a.srnnpb");
    const Checkpoint back = load_checkpoint(s.dir / "a.srnnpb");
    CHECK(back.params.config() == ck.params.config());
    REQUIRE(back.params.values().size() == ck.params.values().size());
    CHECK(std::memcmp(back.params.values().data(), ck.params.values().data(), ck.params.values().size_bytes()) == 0);
    CHECK(std::signbit(back.params.values()[1]));
    CHECK(back.normalization == ck.normalization);
    CHECK(back.sequence_names == ck.sequence_names);
    CHECK(back.sequence_lengths == ck.sequence_lengths);
    CHECK(back.columns == ck.columns);
    CHECK(back.provenance == ck.provenance);

    save_checkpoint(back, s.dir / "b.srnnpb");
    CHECK(read_all(s.dir / "a.srnnpb") == read_all(s.dir / "b.srnnpb"));
}

TEST_CASE("header is readable JSON after the magic") {
    Scratch s;
    save_checkpoint(sample_checkpoint(), s.dir / "c.srnnpb");
    const std::string blob = read_all(s.dir / "c.srnnpb");
    CHECK(blob.substr(0, 8) == "SRNNPBCK");
    std::uint64_t len = 0;
    std::memcpy(&len, blob.data() + 8, 8);
    const auto header = nlohmann::json::parse(blob.substr(16, len));
    CHECK(header["format_version"] == 1);
    CHECK(header["model_config"]["hidden_dim"] == 5);
    CHECK(header["arrays"][0]["name"] == "gate_weights");
    CHECK(header["arrays"][0]["shape"] == nlohmann::json::array({20, 10}));
    CHECK(blob.size() == 16 + len + 8 * sample_checkpoint().params.values().size());
}

TEST_CASE("distinct error kinds") {
    Scratch s;
    const fs::path p = s.dir / "e.srnnpb";

    save_checkpoint(sample_checkpoint(), p);
    edit_header(p, [](auto& h) { h["format_version"] = 2; });
    CHECK(load_error(p) == CheckpointError::Kind::version);

    save_checkpoint(sample_checkpoint(), p);
    edit_header(p, [](auto& h) { h["arrays"][2]["shape"][0] = 4; });
    CHECK(load_error(p) == CheckpointError::Kind::shape);

    save_checkpoint(sample_checkpoint(), p);
    edit_header(p, [](auto& h) { h["model_config"]["hidden_dim"] = 6; });
    CHECK(load_error(p) == CheckpointError::Kind::shape);

    save_checkpoint(sample_checkpoint(), p);
    std::string blob = read_all(p);
    write_all(p, blob.substr(0, blob.size() - 3));
    CHECK(load_error(p) == CheckpointError::Kind::truncated);
    write_all(p, blob.substr(0, 12));
    CHECK(load_error(p) == CheckpointError::Kind::truncated);
    write_all(p, blob + "xx");
    CHECK(load_error(p) == CheckpointError::Kind::corrupt);

    blob[0] = 'X';
    write_all(p, blob);
    CHECK(load_error(p) == CheckpointError::Kind::bad_magic);

    save_checkpoint(sample_checkpoint(), p);
    edit_header(p, [](auto& h) { h.erase("provenance"); });
    CHECK(load_error(p) == CheckpointError::Kind::corrupt);

    CHECK(load_error(s.dir / "missing.srnnpb") == CheckpointError::Kind::io);
}
