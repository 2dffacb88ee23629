#pragma once

#include "msc/tensor_io.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace msc {

struct ManifestEntry {
    std::string name;
    DType dtype;
    std::vector<std::uint64_t> dims;
    std::string file;
};

// Named tensors plus free-form metadata. A cache opened from disk loads
// tensors on first access; a cache built in memory holds them directly.
// Lookups are safe to share across threads.
class ActivationCache {
public:
    ActivationCache() = default;
    ActivationCache(const ActivationCache&) = delete;
    ActivationCache& operator=(const ActivationCache&) = delete;
    ActivationCache(ActivationCache&&) noexcept;
    ActivationCache& operator=(ActivationCache&&) noexcept;

    // Reads manifest.json and checks every entry's header against it.
    static ActivationCache open(const std::filesystem::path& dir);

    // Writes one MSCT file per tensor and manifest.json. Existing files with
    // the same names are overwritten.
    void save(const std::filesystem::path& dir) const;

    void put(TensorRecord record);
    bool contains(const std::string& name) const;
    const TensorRecord& get(const std::string& name) const;
    std::vector<std::string> names() const;
    const ManifestEntry& entry(const std::string& name) const;

    nlohmann::json& meta() { return meta_; }
    const nlohmann::json& meta() const { return meta_; }

    // Ambient dimension from meta["d"]; throws if absent.
    int d() const;

    // FNV-1a 64 over the serialized manifest and tensor bytes, as hex.
    std::string content_hash() const;

    // Checks that meta has "d" and that it matches the activations width.
    void validate() const;

private:
    struct Slot {
        ManifestEntry entry;
        mutable std::unique_ptr<TensorRecord> record;
    };

    std::filesystem::path dir_;
    std::map<std::string, Slot> slots_;
    nlohmann::json meta_ = nlohmann::json::object();
    mutable std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
};

nlohmann::json manifest_json(const ActivationCache& cache);

} // namespace msc
