#pragma once

// Plain-loop re-implementation of one model step, used only as a test oracle.
// No graph machinery: every quantity is computed scalar by scalar.

#include <array>
#include <cmath>
#include <vector>

#include "dekt/data.hpp"
#include "dekt/model.hpp"

namespace refcell {

inline double sg(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::vector<double> row_of(const dekt::Array& table, int r) {
    std::vector<double> out(static_cast<std::size_t>(table.cols()));
    for (int j = 0; j < table.cols(); ++j) out[static_cast<std::size_t>(j)] = table.at(r, j);
    return out;
}

inline std::vector<double> cat(const std::vector<std::vector<double>>& parts) {
    std::vector<double> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

inline std::vector<double> affine_ref(const std::vector<double>& x, const dekt::Array& w,
                                      const dekt::Array& b) {
    std::vector<double> out(static_cast<std::size_t>(w.cols()));
    for (int j = 0; j < w.cols(); ++j) {
        double s = b.at(j);
        for (int i = 0; i < w.rows(); ++i) s += x[static_cast<std::size_t>(i)] * w.at(i, j);
        out[static_cast<std::size_t>(j)] = s;
    }
    return out;
}

struct RefOut {
    double y = 0.0;
    std::array<double, 4> g{};
    std::vector<double> h;  // M*dk row-major
    std::vector<double> f;  // dk
};

// Mirrors the unablated step with dropout off.
inline RefOut reference_step(const dekt::ParameterStore& p, int dk, int M,
                             const dekt::StepInput& in, const std::vector<double>& h_prev,
                             const std::vector<double>& f_prev) {
    auto at_h = [&](const std::vector<double>& h, int m, int j) {
        return h[static_cast<std::size_t>(m * dk + j)];
    };

    std::vector<double> e = row_of(p.at("emb_exercise"), in.exercise);
    std::vector<double> at = row_of(p.at("emb_answer_time"), in.answer_time);
    std::vector<double> it = row_of(p.at("emb_interval_time"), in.interval_time);
    std::vector<double> a = row_of(p.at("emb_answer"), in.answer);
    const char* emo_tables[4] = {"emb_conc", "emb_bor", "emb_conf", "emb_fru"};
    std::vector<std::vector<double>> emo;
    for (int i = 0; i < 4; ++i)
        emo.push_back(row_of(p.at(emo_tables[i]), in.emotion_bins[static_cast<std::size_t>(i)]));
    std::vector<double> cm = affine_ref(cat({emo[0], emo[1], emo[2], emo[3]}), p.at("W1"), p.at("b1"));

    // knowledge path
    std::vector<double> l = affine_ref(cat({e, at, a}), p.at("W2"), p.at("b2"));
    std::vector<double> h_rel(static_cast<std::size_t>(dk), 0.0);
    for (int j = 0; j < dk; ++j)
        for (int m = 0; m < M; ++m)
            h_rel[static_cast<std::size_t>(j)] += (*in.q)[static_cast<std::size_t>(m)] * at_h(h_prev, m, j);

    std::vector<double> lg = affine_ref(cat({l, h_rel}), p.at("W3"), p.at("b3"));
    std::vector<double> gate = affine_ref(cat({cm, l, h_rel}), p.at("W5"), p.at("b5"));
    std::vector<double> dh(static_cast<std::size_t>(dk));
    for (int j = 0; j < dk; ++j) {
        auto ji = static_cast<std::size_t>(j);
        dh[ji] = sg(gate[ji]) * (std::tanh(lg[ji]) + 1.0) / 2.0;
    }
    std::vector<double> dh_tilde(static_cast<std::size_t>(M * dk));
    for (int m = 0; m < M; ++m)
        for (int j = 0; j < dk; ++j)
            dh_tilde[static_cast<std::size_t>(m * dk + j)] =
                (*in.q)[static_cast<std::size_t>(m)] * dh[static_cast<std::size_t>(j)];

    std::vector<double> h_new(static_cast<std::size_t>(M * dk));
    for (int m = 0; m < M; ++m) {
        std::vector<double> hm(static_cast<std::size_t>(dk));
        for (int j = 0; j < dk; ++j) hm[static_cast<std::size_t>(j)] = at_h(h_prev, m, j);
        std::vector<double> z = affine_ref(cat({hm, dh, it}), p.at("W6"), p.at("b6"));
        for (int j = 0; j < dk; ++j) {
            auto ji = static_cast<std::size_t>(j);
            h_new[static_cast<std::size_t>(m * dk + j)] =
                dh_tilde[static_cast<std::size_t>(m * dk + j)] + sg(z[ji]) * hm[ji];
        }
    }

    // emotion path
    double s1 = p.at("beta_at").at(0), s2 = p.at("beta_a").at(0);
    for (int j = 0; j < dk; ++j) {
        auto ji = static_cast<std::size_t>(j);
        s1 += cm[ji] * at[ji];
        s2 += cm[ji] * a[ji];
    }
    double mx = std::max(s1, s2);
    double w1 = std::exp(s1 - mx), w2 = std::exp(s2 - mx);
    double a1 = w1 / (w1 + w2), a2 = w2 / (w1 + w2);
    std::vector<double> es(static_cast<std::size_t>(dk));
    for (int j = 0; j < dk; ++j) {
        auto ji = static_cast<std::size_t>(j);
        es[ji] = a1 * at[ji] + a2 * a[ji];
    }

    std::vector<double> f_temp = affine_ref(cat({e, cm, es}), p.at("W7"), p.at("b7"));
    for (double& v : f_temp) v = sg(v);
    std::vector<double> ff = cat({f_temp, f_prev});
    std::vector<double> aec = affine_ref(ff, p.at("W8"), p.at("b8"));
    std::vector<double> aec_gate = affine_ref(ff, p.at("W9"), p.at("b9"));
    std::vector<double> df(static_cast<std::size_t>(dk));
    for (int j = 0; j < dk; ++j) {
        auto ji = static_cast<std::size_t>(j);
        df[ji] = std::tanh(aec[ji]) * sg(aec_gate[ji]);
    }

    std::vector<double> dh_rel(static_cast<std::size_t>(dk), 0.0);
    for (int j = 0; j < dk; ++j)
        for (int m = 0; m < M; ++m)
            dh_rel[static_cast<std::size_t>(j)] +=
                (*in.q)[static_cast<std::size_t>(m)] * dh_tilde[static_cast<std::size_t>(m * dk + j)];

    std::vector<double> inter(static_cast<std::size_t>(dk));
    for (int j = 0; j < dk; ++j) {
        auto ji = static_cast<std::size_t>(j);
        inter[ji] = df[ji] * dh_rel[ji];
    }
    std::vector<double> logits = affine_ref(inter, p.at("W10"), p.at("b10"));
    double lmax = logits[0];
    for (double v : logits) lmax = std::max(lmax, v);
    double lsum = 0.0;
    for (double v : logits) lsum += std::exp(v - lmax);
    std::vector<double> f_new(static_cast<std::size_t>(dk));
    for (int j = 0; j < dk; ++j) {
        auto ji = static_cast<std::size_t>(j);
        double w = std::exp(logits[ji] - lmax) / lsum;
        f_new[ji] = w * df[ji] + (1.0 - w) * f_prev[ji];
    }

    // predictions against t+1
    std::vector<double> e_next = row_of(p.at("emb_exercise"), in.next_exercise);
    std::vector<double> cm_pred = affine_ref(cat({f_new, e_next}), p.at("W11"), p.at("b11"));
    for (double& v : cm_pred) v = sg(v);

    std::vector<double> gl = affine_ref(cm_pred, p.at("W13"), p.at("b13"));
    RefOut out;
    for (int i = 0; i < 4; ++i) out.g[static_cast<std::size_t>(i)] = sg(gl[static_cast<std::size_t>(i)]);

    std::vector<double> h_rel_next(static_cast<std::size_t>(dk), 0.0);
    for (int j = 0; j < dk; ++j)
        for (int m = 0; m < M; ++m)
            h_rel_next[static_cast<std::size_t>(j)] +=
                (*in.q_next)[static_cast<std::size_t>(m)] * h_new[static_cast<std::size_t>(m * dk + j)];
    std::vector<double> em(static_cast<std::size_t>(dk)), hm(static_cast<std::size_t>(dk));
    for (int j = 0; j < dk; ++j) {
        auto ji = static_cast<std::size_t>(j);
        em[ji] = cm_pred[ji] * e_next[ji];
        hm[ji] = cm_pred[ji] * h_rel_next[ji];
    }
    out.y = sg(affine_ref(cat({em, hm}), p.at("W12"), p.at("b12"))[0]);
    out.h = std::move(h_new);
    out.f = std::move(f_new);
    return out;
}

} // namespace refcell
