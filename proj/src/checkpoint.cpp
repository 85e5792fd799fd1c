#include "srnnpb/checkpoint.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace srnnpb {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'R', 'N', 'N', 'P', 'B', 'C', 'K'};

std::uint64_t to_little_endian(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
        return r;
    }
    return v;
}

void put_u64(std::string& out, std::uint64_t v) {
    v = to_little_endian(v);
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

std::uint64_t get_u64(const char* p) {
    std::uint64_t v = 0;
    std::memcpy(&v, p, 8);
    return to_little_endian(v);
}

json normalization_to_json(const Normalization& n) {
    return {{"mode", to_string(n.mode)}, {"offset", n.offset}, {"scale", n.scale}};
}

Normalization normalization_from_json(const json& j) {
    Normalization n;
    n.mode = parse_normalization_mode(j.at("mode").get<std::string>());
    n.offset = j.at("offset").get<std::vector<double>>();
    n.scale = j.at("scale").get<std::vector<double>>();
    return n;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    const ModelParams& params = checkpoint.params;
    const ModelConfig& cfg = params.config();

    json header;
    header["format_version"] = kCheckpointFormatVersion;
    header["model_config"] = {{"input_dim", cfg.input_dim},
                              {"pb_dim", cfg.pb_dim},
                              {"hidden_dim", cfg.hidden_dim},
                              {"deterministic", cfg.deterministic},
                              {"beta", cfg.beta}};
    header["num_sequences"] = params.num_sequences();
    json arrays = json::array();
    for (const auto& a : params.layout()) arrays.push_back({{"name", a.name}, {"shape", {a.rows, a.cols}}});
    header["arrays"] = arrays;
    header["normalization"] = normalization_to_json(checkpoint.normalization);
    header["sequences"] = {{"names", checkpoint.sequence_names},
                           {"lengths", checkpoint.sequence_lengths},
                           {"columns", checkpoint.columns}};
    const auto& prov = checkpoint.provenance;
    header["provenance"] = {{"seed", prov.seed},
                            {"epochs_completed", prov.epochs_completed},
                            {"learning_rate", prov.learning_rate},
                            {"final_loss",
                             {{"recon", prov.final_loss.recon}, {"kl", prov.final_loss.kl}, {"total", prov.final_loss.total}}}};

    const std::string header_text = header.dump();
    std::string blob(kMagic, sizeof(kMagic));
    put_u64(blob, header_text.size());
    blob += header_text;
    for (double v : params.values()) put_u64(blob, std::bit_cast<std::uint64_t>(v));

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError(CheckpointError::Kind::io, "cannot write checkpoint " + path.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::io, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot open checkpoint " + path.string());
    const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string name = path.string();

    if (blob.size() < 16) throw CheckpointError(CheckpointError::Kind::truncated, name + ": truncated header");
    if (std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError(CheckpointError::Kind::bad_magic, name + ": not a checkpoint file");
    const std::uint64_t header_len = get_u64(blob.data() + 8);
    if (header_len > blob.size() - 16) throw CheckpointError(CheckpointError::Kind::truncated, name + ": truncated header");

    json header;
    try {
        header = json::parse(blob.begin() + 16, blob.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
    } catch (const json::exception& e) {
        throw CheckpointError(CheckpointError::Kind::corrupt, name + ": malformed header: " + e.what());
    }

    try {
        const auto version = header.at("format_version").get<std::uint32_t>();
        if (version != kCheckpointFormatVersion)
            throw CheckpointError(CheckpointError::Kind::version,
                                  name + ": unsupported format_version " + std::to_string(version));

        const json& mc = header.at("model_config");
        ModelConfig cfg;
        cfg.input_dim = mc.at("input_dim").get<std::size_t>();
        cfg.pb_dim = mc.at("pb_dim").get<std::size_t>();
        cfg.hidden_dim = mc.at("hidden_dim").get<std::size_t>();
        cfg.deterministic = mc.at("deterministic").get<bool>();
        cfg.beta = mc.at("beta").get<double>();
        try {
            cfg.validate();
        } catch (const std::invalid_argument& e) {
            throw CheckpointError(CheckpointError::Kind::shape, name + ": " + e.what());
        }
        const auto num_sequences = header.at("num_sequences").get<std::size_t>();

        Checkpoint ck;
        ck.params = ModelParams(cfg, num_sequences);
        const auto expected = ck.params.layout();
        const json& arrays = header.at("arrays");
        if (arrays.size() != expected.size())
            throw CheckpointError(CheckpointError::Kind::shape, name + ": unexpected number of arrays");
        for (std::size_t k = 0; k < expected.size(); ++k) {
            const auto shape = arrays[k].at("shape").get<std::vector<std::size_t>>();
            if (arrays[k].at("name").get<std::string>() != expected[k].name || shape.size() != 2 ||
                shape[0] != expected[k].rows || shape[1] != expected[k].cols)
                throw CheckpointError(CheckpointError::Kind::shape,
                                      name + ": array '" + expected[k].name + "' is inconsistent with model_config");
        }

        auto values = ck.params.values();
        const std::size_t payload = blob.size() - 16 - header_len;
        if (payload < values.size() * 8) throw CheckpointError(CheckpointError::Kind::truncated, name + ": truncated payload");
        if (payload > values.size() * 8) throw CheckpointError(CheckpointError::Kind::corrupt, name + ": trailing bytes");
        const char* p = blob.data() + 16 + header_len;
        for (std::size_t k = 0; k < values.size(); ++k) values[k] = std::bit_cast<double>(get_u64(p + 8 * k));

        ck.normalization = normalization_from_json(header.at("normalization"));
        if (ck.normalization.mode != NormalizationMode::none &&
            (ck.normalization.offset.size() != cfg.input_dim || ck.normalization.scale.size() != cfg.input_dim))
            throw CheckpointError(CheckpointError::Kind::shape, name + ": normalization does not match input_dim");
        const json& seq = header.at("sequences");
        ck.sequence_names = seq.at("names").get<std::vector<std::string>>();
        ck.sequence_lengths = seq.at("lengths").get<std::vector<std::size_t>>();
        ck.columns = seq.at("columns").get<std::vector<std::string>>();
        if (ck.sequence_lengths.size() != num_sequences)
            throw CheckpointError(CheckpointError::Kind::shape, name + ": sequence lengths do not match num_sequences");

        const json& prov = header.at("provenance");
        ck.provenance.seed = prov.at("seed").get<std::uint64_t>();
        ck.provenance.epochs_completed = prov.at("epochs_completed").get<std::size_t>();
        ck.provenance.learning_rate = prov.at("learning_rate").get<double>();
        const json& loss = prov.at("final_loss");
        ck.provenance.final_loss = {loss.at("recon").get<double>(), loss.at("kl").get<double>(),
                                    loss.at("total").get<double>()};
        return ck;
    } catch (const json::exception& e) {
        throw CheckpointError(CheckpointError::Kind::corrupt, name + ": malformed header: " + e.what());
    } catch (const DatasetError& e) {
        throw CheckpointError(CheckpointError::Kind::corrupt, name + ": " + e.what());
    }
}

}  // namespace srnnpb
