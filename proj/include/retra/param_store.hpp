#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "retra/errors.hpp"
#include "retra/graph.hpp"
#include "retra/tensor.hpp"

namespace retra {

// Named parameter container. std::map keeps iteration lexicographic, which
// pins the order of optimizer updates and serialization for seeded runs.
class param_store {
public:
    struct entry {
        tensor value;
        bool trainable = true;
    };

    using map_type = std::map<std::string, entry>;

    bool contains(const std::string& name) const { return entries_.count(name) > 0; }

    void insert(const std::string& name, tensor t, bool trainable = true) {
        if (contains(name)) throw config_error("param_store: duplicate parameter '" + name + "'");
        entries_[name] = entry{std::move(t), trainable};
    }

    tensor& at(const std::string& name) {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw config_error("param_store: unknown parameter '" + name + "'");
        return it->second.value;
    }

    const tensor& at(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw config_error("param_store: unknown parameter '" + name + "'");
        return it->second.value;
    }

    bool trainable(const std::string& name) const {
        auto it = entries_.find(name);
        if (it == entries_.end()) throw config_error("param_store: unknown parameter '" + name + "'");
        return it->second.trainable;
    }

    std::size_t size() const { return entries_.size(); }
    map_type::iterator begin() { return entries_.begin(); }
    map_type::iterator end() { return entries_.end(); }
    map_type::const_iterator begin() const { return entries_.begin(); }
    map_type::const_iterator end() const { return entries_.end(); }

    // Flat binary container: magic "RTPS", version u32, count u32, then per
    // entry u16 name length, name bytes, u8 rank, dims as u64, payload f64.
    // All integers and floats little-endian.
    void save(const std::string& path) const {
        const std::filesystem::path parent = std::filesystem::path(path).parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw config_error("param_store: cannot open '" + path + "' for writing");
        out.write("RTPS", 4);
        write_u32(out, 1u);
        write_u32(out, static_cast<std::uint32_t>(entries_.size()));
        for (const auto& [name, e] : entries_) {
            if (name.size() > 0xffff) throw config_error("param_store: name too long: " + name);
            write_u16(out, static_cast<std::uint16_t>(name.size()));
            out.write(name.data(), static_cast<std::streamsize>(name.size()));
            const auto rank = static_cast<std::uint8_t>(e.value.shape.size());
            out.write(reinterpret_cast<const char*>(&rank), 1);
            for (std::size_t d : e.value.shape) write_u64(out, static_cast<std::uint64_t>(d));
            out.write(reinterpret_cast<const char*>(e.value.data.data()),
                      static_cast<std::streamsize>(e.value.data.size() * sizeof(double)));
        }
        if (!out) throw config_error("param_store: write failed for '" + path + "'");
    }

    static param_store load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw config_error("param_store: cannot open '" + path + "'");
        char magic[4];
        in.read(magic, 4);
        if (!in || std::memcmp(magic, "RTPS", 4) != 0)
            throw config_error("param_store: '" + path + "' is not an RTPS container");
        const std::uint32_t version = read_u32(in);
        if (version != 1u)
            throw config_error("param_store: unsupported container version " + std::to_string(version));
        const std::uint32_t count = read_u32(in);
        param_store store;
        for (std::uint32_t i = 0; i < count; ++i) {
            const std::uint16_t name_len = read_u16(in);
            std::string name(name_len, '\0');
            in.read(name.data(), name_len);
            std::uint8_t rank = 0;
            in.read(reinterpret_cast<char*>(&rank), 1);
            tensor t;
            std::size_t total = 1;
            for (std::uint8_t d = 0; d < rank; ++d) {
                const auto dim = static_cast<std::size_t>(read_u64(in));
                t.shape.push_back(dim);
                total *= dim;
            }
            t.data.resize(total);
            in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(total * sizeof(double)));
            if (!in) throw config_error("param_store: truncated container '" + path + "'");
            store.entries_[name] = entry{std::move(t), true};
        }
        return store;
    }

private:
    map_type entries_;

    static void write_u16(std::ofstream& out, std::uint16_t v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    static void write_u32(std::ofstream& out, std::uint32_t v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    static void write_u64(std::ofstream& out, std::uint64_t v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    static std::uint16_t read_u16(std::ifstream& in) {
        std::uint16_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        return v;
    }
    static std::uint32_t read_u32(std::ifstream& in) {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        return v;
    }
    static std::uint64_t read_u64(std::ifstream& in) {
        std::uint64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        return v;
    }
};

// Leaves for every parameter of a store inside one graph, so shared weights
// accumulate gradients additively across uses. `freeze` overrides the
// per-parameter trainable flag (target networks, critic during actor steps).
class bound_params {
public:
    bound_params() = default;

    bound_params(graph& g, const param_store& store, bool freeze = false) : graph_(&g) {
        for (const auto& [name, e] : store)
            vars_[name] = g.leaf(e.value, freeze ? false : e.trainable);
    }

    var operator[](const std::string& name) const {
        auto it = vars_.find(name);
        if (it == vars_.end()) throw config_error("bound_params: unknown parameter '" + name + "'");
        return it->second;
    }

    // Gradients for trainable parameters after backward(); missing entries
    // (frozen or unused parameters) are skipped.
    std::map<std::string, tensor> gradients() const {
        std::map<std::string, tensor> out;
        for (const auto& [name, v] : vars_) {
            const tensor* g = try_grad(v);
            if (g != nullptr) out[name] = *g;
        }
        return out;
    }

private:
    const tensor* try_grad(var v) const {
        try {
            return &graph_->grad(v);
        } catch (const config_error&) {
            return nullptr;
        }
    }

    graph* graph_ = nullptr;
    std::map<std::string, var> vars_;
};

}
