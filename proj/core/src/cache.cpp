#include "msc/cache.hpp"

#include "msc/error.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

namespace msc {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open: " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Fnv1a {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    void add(const std::uint8_t* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    }
};

} // namespace

ActivationCache::ActivationCache(ActivationCache&&) noexcept = default;
ActivationCache& ActivationCache::operator=(ActivationCache&&) noexcept = default;

ActivationCache ActivationCache::open(const fs::path& dir) {
    const fs::path manifest = dir / "manifest.json";
    if (!fs::exists(manifest)) throw IoError("no manifest.json in " + dir.string());
    nlohmann::json j;
    try {
        std::ifstream in(manifest);
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest.json: " + std::string(e.what()));
    }

    ActivationCache cache;
    cache.dir_ = dir;
    if (j.contains("meta")) cache.meta_ = j.at("meta");
    if (!j.contains("tensors") || !j.at("tensors").is_array()) throw IoError("manifest.json lacks a tensors array");
    for (const auto& t : j.at("tensors")) {
        ManifestEntry e;
        try {
            e.name = t.at("name").get<std::string>();
            e.dtype = dtype_from_name(t.at("dtype").get<std::string>());
            e.dims = t.at("dims").get<std::vector<std::uint64_t>>();
            e.file = t.at("file").get<std::string>();
        } catch (const nlohmann::json::exception& ex) {
            throw IoError("malformed manifest entry: " + std::string(ex.what()));
        }
        if (!valid_tensor_name(e.name)) throw IoError("invalid tensor name '" + e.name + "'");
        if (!valid_tensor_name(e.file)) throw IoError("invalid tensor file '" + e.file + "'");
        if (cache.slots_.count(e.name)) throw IoError("duplicate tensor name '" + e.name + "'");

        // Header check only; payload is read on first access.
        const fs::path p = dir / e.file;
        std::ifstream in(p, std::ios::binary);
        if (!in) throw IoError("manifest entry '" + e.name + "' has no file " + p.string());
        std::uint8_t head[8];
        in.read(reinterpret_cast<char*>(head), 8);
        if (in.gcount() != 8 || head[0] != 'M' || head[1] != 'S' || head[2] != 'C' || head[3] != 'T')
            throw IoError("tensor '" + e.name + "': bad magic");
        if (head[6] != static_cast<std::uint8_t>(e.dtype) || head[7] != e.dims.size())
            throw IoError("tensor '" + e.name + "' disagrees with manifest");

        cache.slots_.emplace(e.name, Slot{e, nullptr});
    }
    cache.validate();
    return cache;
}

void ActivationCache::save(const fs::path& dir) const {
    fs::create_directories(dir);
    for (const auto& name : names()) {
        const auto& rec = get(name);
        write_tensor(rec, dir / slots_.at(name).entry.file);
    }
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw IoError("cannot write manifest in " + dir.string());
    out << manifest_json(*this).dump(2) << '\n';
}

void ActivationCache::put(TensorRecord record) {
    record.validate();
    if (!valid_tensor_name(record.name)) throw ValidationError("invalid tensor name '" + record.name + "'");
    ManifestEntry e{record.name, record.dtype(), record.dims, record.name + ".msct"};
    const std::string key = record.name;
    std::lock_guard lock(*mu_);
    slots_[key] = Slot{std::move(e), std::make_unique<TensorRecord>(std::move(record))};
}

bool ActivationCache::contains(const std::string& name) const { return slots_.count(name) != 0; }

const ManifestEntry& ActivationCache::entry(const std::string& name) const {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw ValidationError("cache has no tensor '" + name + "'");
    return it->second.entry;
}

const TensorRecord& ActivationCache::get(const std::string& name) const {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw ValidationError("cache has no tensor '" + name + "'");
    std::lock_guard lock(*mu_);
    const Slot& slot = it->second;
    if (!slot.record) {
        auto rec = decode_tensor(slurp(dir_ / slot.entry.file), name);
        if (rec.dims != slot.entry.dims || rec.dtype() != slot.entry.dtype)
            throw IoError("tensor '" + name + "' disagrees with manifest");
        slot.record = std::make_unique<TensorRecord>(std::move(rec));
    }
    return *slot.record;
}

std::vector<std::string> ActivationCache::names() const {
    std::vector<std::string> out;
    out.reserve(slots_.size());
    for (const auto& [k, v] : slots_) out.push_back(k);
    return out;
}

int ActivationCache::d() const {
    if (!meta_.contains("d")) throw ValidationError("cache meta lacks 'd'");
    return meta_.at("d").get<int>();
}

void ActivationCache::validate() const {
    if (!meta_.contains("d") || !meta_.at("d").is_number_integer())
        throw ValidationError("cache meta must contain integer 'd'");
    if (contains("activations")) {
        const auto& e = entry("activations");
        if (e.dims.size() < 2 || e.dims.back() != static_cast<std::uint64_t>(d()))
            throw ValidationError("meta d does not match activations width");
    }
}

nlohmann::json manifest_json(const ActivationCache& cache) {
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& name : cache.names()) {
        const auto& e = cache.entry(name);
        tensors.push_back({{"name", e.name}, {"dtype", dtype_name(e.dtype)}, {"dims", e.dims}, {"file", e.file}});
    }
    return {{"meta", cache.meta()}, {"tensors", tensors}};
}

std::string ActivationCache::content_hash() const {
    Fnv1a h;
    const std::string m = manifest_json(*this).dump();
    h.add(reinterpret_cast<const std::uint8_t*>(m.data()), m.size());
    for (const auto& name : names()) {
        const auto bytes = encode_tensor(get(name));
        h.add(bytes.data(), bytes.size());
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h.h));
    return buf;
}

} // namespace msc
