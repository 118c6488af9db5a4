#ifndef POSEVID_PARAMS_HPP
#define POSEVID_PARAMS_HPP

#include <map>
#include <string>
#include <vector>

#include "posevid/rng.hpp"
#include "posevid/tensor.hpp"

namespace posevid {

// Named parameter collection. Ordered iteration keeps optimizer state,
// checkpoints, and hashes deterministic.
template <typename S>
class ParamStoreT {
public:
    // Creates (or returns an existing) parameter tensor.
    TensorPtr<S> create(const std::string& name, std::vector<int> shape) {
        auto it = params_.find(name);
        if (it != params_.end()) {
            require(it->second->shape == shape, "param shape clash for " + name);
            return it->second;
        }
        auto t = make_tensor<S>(std::move(shape));
        t->requires_grad = true;
        params_[name] = t;
        return t;
    }

    TensorPtr<S> at(const std::string& name) const {
        auto it = params_.find(name);
        require(it != params_.end(), "unknown parameter: " + name);
        return it->second;
    }

    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    const std::map<std::string, TensorPtr<S>>& all() const { return params_; }

    int64_t total_size() const {
        int64_t n = 0;
        for (const auto& [k, v] : params_) n += v->size();
        return n;
    }

    void zero_grads() {
        for (auto& [k, v] : params_) v->zero_grad();
    }

    // FNV-1a over the value bytes of parameters matching the filter; used by
    // freeze-discipline checks.
    template <typename Pred>
    uint64_t hash_values(Pred pred) const {
        uint64_t h = 1469598103934665603ULL;
        for (const auto& [k, v] : params_) {
            if (!pred(k)) continue;
            const unsigned char* p = reinterpret_cast<const unsigned char*>(v->value.data());
            for (int64_t i = 0; i < v->size() * int64_t(sizeof(S)); ++i) {
                h = (h ^ p[i]) * 1099511628211ULL;
            }
        }
        return h;
    }

private:
    std::map<std::string, TensorPtr<S>> params_;
};

// He fan-in normal init.
template <typename S>
void init_he_normal(const TensorPtr<S>& w, int fan_in, Rng& rng) {
    const double std = std::sqrt(2.0 / double(fan_in));
    for (int64_t i = 0; i < w->size(); ++i) {
        w->value[i] = S(rng.normal() * std);
    }
}

template <typename S>
void init_normal(const TensorPtr<S>& w, double std, Rng& rng) {
    for (int64_t i = 0; i < w->size(); ++i) {
        w->value[i] = S(rng.normal() * std);
    }
}

}  // namespace posevid

#endif
