#pragma once

#include <vector>

#include "lfmdfn/ad/params.hpp"
#include "lfmdfn/model/mdfn.hpp"

namespace oracle {

// Six nested loops over (u, v, p, q, i, j), taps 0-based and centred:
//   out(u,v,p,q) = sum_ij F(u,v,p,q,i,j) * lr(u+i-d/2, v+j-d/2, p/r, q/r), zero outside the grid.
// F is indexed (U*V, d*d, rX, rY) and lr (U, V, X, Y), both row-major.
inline std::vector<double> dynamic_filters(const std::vector<double>& F, const std::vector<double>& lr, long U, long V,
                                           long X, long Y, long d, long r) {
    const long RX = r * X, RY = r * Y, h = d / 2;
    std::vector<double> out(U * V * RX * RY, 0.0);
    for (long u = 0; u < U; ++u)
        for (long v = 0; v < V; ++v)
            for (long p = 0; p < RX; ++p)
                for (long q = 0; q < RY; ++q)
                    for (long i = 0; i < d; ++i)
                        for (long j = 0; j < d; ++j) {
                            const long su = u + i - h, sv = v + j - h;
                            if (su < 0 || sv < 0 || su >= U || sv >= V) continue;
                            const double f = F[(((u * V + v) * d * d + i * d + j) * RX + p) * RY + q];
                            out[((u * V + v) * RX + p) * RY + q] += f * lr[((su * V + sv) * X + p / r) * Y + q / r];
                        }
    return out;
}

/// Forces the DFB to emit one-hot centre-tap filters and the RB to emit zero.
template <class T>
void make_delta_model(lfmdfn::ad::ParamStore<T>& params, const lfmdfn::model::MDFNConfig& cfg) {
    auto zero = [&](const std::string& n) {
        for (auto& v : params.at(n).data()) v = T(0);
    };
    zero("dfb.conv2.weight");
    zero("dfb.conv2.bias");
    // exp(-1e4) underflows to exactly zero, so the softmax is exactly one-hot.
    params.at("dfb.conv2.bias").data()[(cfg.d / 2) * cfg.d + cfg.d / 2] = T(1e4);
    zero("rb.conv2.weight");
    zero("rb.conv2.bias");
}

}  // namespace oracle
