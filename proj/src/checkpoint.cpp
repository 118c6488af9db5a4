#include "posevid/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace posevid {

using nlohmann::json;

namespace {
constexpr char kMagic[] = "PVCKPT1\n";
constexpr size_t kMagicLen = 8;
}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& ps, int stage,
                     const json& run_config, const NoiseSchedule& schedule) {
    json manifest;
    manifest["format"] = 1;
    manifest["stage"] = stage;
    manifest["run_config"] = run_config;
    manifest["schedule"] = {
        {"T", schedule.T}, {"beta", schedule.beta}, {"alpha_bar", schedule.alpha_bar}};
    json params = json::array();
    for (const auto& [name, t] : ps.all()) {
        params.push_back({{"name", name}, {"shape", t->shape}});
    }
    manifest["params"] = params;
    const std::string mstr = manifest.dump();

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        require(out.good(), "save_checkpoint: cannot open " + tmp);
        out.write(kMagic, kMagicLen);
        const uint64_t mlen = mstr.size();
        out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
        out.write(mstr.data(), std::streamsize(mstr.size()));
        for (const auto& [name, t] : ps.all()) {
            out.write(reinterpret_cast<const char*>(t->value.data()),
                      std::streamsize(t->size() * sizeof(float)));
        }
        require(out.good(), "save_checkpoint: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

CheckpointMeta load_checkpoint(const std::string& path, ParamStore& ps) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "load_checkpoint: cannot open " + path);
    char magic[kMagicLen];
    in.read(magic, kMagicLen);
    require(in.good() && std::memcmp(magic, kMagic, kMagicLen) == 0,
            "load_checkpoint: bad magic in " + path);
    uint64_t mlen = 0;
    in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
    std::string mstr(mlen, '\0');
    in.read(mstr.data(), std::streamsize(mlen));
    require(in.good(), "load_checkpoint: truncated manifest in " + path);
    json manifest = json::parse(mstr);

    CheckpointMeta meta;
    meta.stage = manifest.at("stage").get<int>();
    meta.run_config = manifest.value("run_config", json::object());
    const auto& sj = manifest.at("schedule");
    meta.schedule.T = sj.at("T").get<int>();
    meta.schedule.beta = sj.at("beta").get<std::vector<double>>();
    meta.schedule.alpha_bar = sj.at("alpha_bar").get<std::vector<double>>();
    meta.schedule.snr.resize(meta.schedule.alpha_bar.size());
    for (size_t i = 0; i < meta.schedule.alpha_bar.size(); ++i) {
        const double ab = meta.schedule.alpha_bar[i];
        meta.schedule.snr[i] = ab / (1.0 - ab);
    }

    for (const auto& pj : manifest.at("params")) {
        const std::string name = pj.at("name").get<std::string>();
        const std::vector<int> shape = pj.at("shape").get<std::vector<int>>();
        auto t = ps.create(name, shape);
        in.read(reinterpret_cast<char*>(t->value.data()),
                std::streamsize(t->size() * sizeof(float)));
        require(in.good(), "load_checkpoint: truncated data for " + name);
    }
    return meta;
}

}  // namespace posevid
