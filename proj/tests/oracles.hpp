#pragma once

// Independent oracles used by the unit and acceptance suites. Everything here
// recomputes results from first principles and stays off the library's fast
// paths: subset enumeration for bank lookup, full stable sort for ranking,
// scalar recomputation for losses.

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "stylebank/promptbank.hpp"
#include "stylebank/retrieval.hpp"

namespace oracles {

// Exhaustive subset argmin of the summed cosine-distance score. Ties resolve
// to the lexicographically smallest id set, which matches the per-id tie rule.
inline std::vector<int> brute_force_lookup(const stylebank::PromptBank& bank,
                                           const std::vector<double>& prototype) {
    const int n = bank.n_select;
    const int N = bank.size();
    std::vector<double> gamma(N);
    for (int i = 0; i < N; ++i) gamma[i] = stylebank::score(prototype, bank.entries[i].key);

    std::vector<int> best;
    double best_sum = 0.0;
    std::vector<int> pick(n);
    // Enumerate all C(N, n) combinations in lexicographic order.
    for (int i = 0; i < n; ++i) pick[i] = i;
    while (true) {
        double sum = 0.0;
        for (int id : pick) sum += gamma[id];
        if (best.empty() || sum < best_sum - 1e-15) {
            best = pick;
            best_sum = sum;
        }
        int i = n - 1;
        while (i >= 0 && pick[i] == N - n + i) --i;
        if (i < 0) break;
        ++pick[i];
        for (int j = i + 1; j < n; ++j) pick[j] = pick[j - 1] + 1;
    }
    // The library reports selection ordered by (score, id); sort the subset the same way.
    std::sort(best.begin(), best.end(), [&](int a, int b) {
        if (gamma[a] != gamma[b]) return gamma[a] < gamma[b];
        return a < b;
    });
    return best;
}

// Full sort of every record by (similarity desc, id asc).
inline std::vector<std::pair<uint64_t, double>> brute_force_rank(
    const stylebank::RetrievalIndex& index, const std::vector<double>& q, int k) {
    std::vector<std::pair<uint64_t, double>> all;
    for (const auto& r : index.records) {
        double s = 0.0;
        for (size_t i = 0; i < q.size(); ++i) s += q[i] * r.embedding[i];
        all.emplace_back(r.id, s);
    }
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    all.resize(static_cast<size_t>(k));
    return all;
}

// Scalar re-derivation of the hinge, kept deliberately naive.
inline double triplet_by_hand(const std::vector<double>& f, const std::vector<double>& r,
                              const std::vector<double>& h, double margin) {
    double dr = 0.0, dh = 0.0;
    for (size_t i = 0; i < f.size(); ++i) {
        dr += f[i] * r[i];
        dh += f[i] * h[i];
    }
    const double v = margin + (1.0 - dr) - (1.0 - dh);
    return std::max(0.0, v);
}

inline std::vector<double> random_unit(std::mt19937_64& rng, int d) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(d);
    double n2 = 0.0;
    do {
        n2 = 0.0;
        for (double& x : v) {
            x = dist(rng);
            n2 += x * x;
        }
    } while (n2 < 1e-12);
    const double n = std::sqrt(n2);
    for (double& x : v) x /= n;
    return v;
}

}  // namespace oracles
