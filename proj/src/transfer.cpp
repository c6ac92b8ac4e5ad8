#include "dekt/transfer.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace dekt {

namespace {
constexpr int kFormatVersion = 1;
} // namespace

void save_checkpoint(const ParameterStore& params, const CheckpointConfig& config,
                     const std::string& base_path) {
    nlohmann::json manifest;
    manifest["version"] = kFormatVersion;
    manifest["config"] = {{"d_k", config.d_k}, {"bins", config.bins}, {"variant", config.variant}};
    nlohmann::json entries = nlohmann::json::array();

    std::ofstream blob(base_path + ".blob", std::ios::binary);
    if (!blob) throw std::runtime_error("cannot write " + base_path + ".blob");
    long long offset = 0;
    for (const auto& name : params.order) {
        const Array& a = params.at(name);
        if (!a.all_finite()) throw std::runtime_error("save_checkpoint: non-finite parameter " + name);
        entries.push_back({{"name", name}, {"shape", a.shape}, {"offset", offset}});
        blob.write(reinterpret_cast<const char*>(a.data.data()),
                   static_cast<std::streamsize>(a.data.size() * sizeof(double)));
        offset += static_cast<long long>(a.data.size() * sizeof(double));
    }
    manifest["entries"] = std::move(entries);

    std::ofstream mf(base_path + ".manifest.json");
    if (!mf) throw std::runtime_error("cannot write " + base_path + ".manifest.json");
    mf << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& base_path) {
    std::ifstream mf(base_path + ".manifest.json");
    if (!mf) throw std::runtime_error("cannot open " + base_path + ".manifest.json");
    nlohmann::json manifest = nlohmann::json::parse(mf);
    if (manifest.at("version").get<int>() != kFormatVersion)
        throw std::runtime_error("checkpoint version mismatch: expected " +
                                 std::to_string(kFormatVersion) + ", got " +
                                 manifest.at("version").dump());

    Checkpoint ckpt;
    ckpt.config.d_k = manifest.at("config").at("d_k").get<int>();
    ckpt.config.bins = manifest.at("config").at("bins").get<int>();
    ckpt.config.variant = manifest.at("config").at("variant").get<std::string>();

    std::ifstream blob(base_path + ".blob", std::ios::binary | std::ios::ate);
    if (!blob) throw std::runtime_error("cannot open " + base_path + ".blob");
    long long blob_size = static_cast<long long>(blob.tellg());
    blob.seekg(0);

    long long expected = 0;
    for (const auto& e : manifest.at("entries")) {
        std::string name = e.at("name").get<std::string>();
        std::vector<int> shape = e.at("shape").get<std::vector<int>>();
        long long offset = e.at("offset").get<long long>();
        if (offset != expected)
            throw std::runtime_error("checkpoint: non-contiguous offset for " + name);
        Array a(shape, 0.0);
        expected += static_cast<long long>(a.data.size() * sizeof(double));
        if (expected > blob_size)
            throw std::runtime_error("truncated blob: entry " + name + " extends past end");
        blob.read(reinterpret_cast<char*>(a.data.data()),
                  static_cast<std::streamsize>(a.data.size() * sizeof(double)));
        ckpt.params.add(name, std::move(a));
        if (name.rfind("emb_", 0) == 0) ckpt.params.freeze_row0.insert(name);
    }
    if (expected != blob_size)
        throw std::runtime_error("truncated blob: manifest covers " + std::to_string(expected) +
                                 " bytes, blob has " + std::to_string(blob_size));
    return ckpt;
}

std::vector<std::string> transfer_frozen_names() {
    return {"emb_conc", "emb_bor", "emb_conf", "emb_fru", "W1", "b1", "W13", "b13"};
}

ParameterStore transfer_init(const Checkpoint& source, const ModelConfig& target, Rng& rng) {
    if (source.config.d_k != target.d_k)
        throw std::invalid_argument("transfer_init: d_k mismatch (" +
                                    std::to_string(source.config.d_k) + " vs " +
                                    std::to_string(target.d_k) + ")");
    if (source.config.bins != target.bins)
        throw std::invalid_argument("transfer_init: bins mismatch");

    ParameterStore params = init_parameters(target, rng);
    for (const auto& name : transfer_frozen_names()) {
        if (!source.params.has(name))
            throw std::invalid_argument("transfer_init: source checkpoint missing " + name);
        if (!params.has(name))
            throw std::invalid_argument("transfer_init: target has no parameter " + name);
        if (params.at(name).shape != source.params.at(name).shape)
            throw std::invalid_argument("transfer_init: shape mismatch for " + name);
        params.at(name) = source.params.at(name);
        params.frozen.insert(name);
    }
    return params;
}

TrainResult train_transfer(const Checkpoint& source, const TrainConfig& cfg, const Dataset& data,
                           const FoldSplit& fold) {
    if (data.has_emotions)
        throw std::invalid_argument("train_transfer: dataset carries emotions, use train instead");
    TrainConfig c = cfg;
    c.transfer_mode = true;
    ModelConfig mc = model_config_for(c, data);
    Rng rng(c.seed);
    ParameterStore params = transfer_init(source, mc, rng);
    return train(c, data, fold, &params);
}

} // namespace dekt
