#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "melm/corpus.hpp"
#include "melm/errors.hpp"
#include "melm/linearize.hpp"
#include "melm/masking.hpp"
#include "melm/rng.hpp"
#include "melm/vocab.hpp"

namespace melm {

// Per masked position, a probability distribution over the vocabulary.
class MlmBackend {
public:
    virtual ~MlmBackend() = default;
    virtual const Vocabulary& vocab() const = 0;
    virtual std::vector<std::vector<double>> predict(const MaskPlan& plan) const = 0;
};

struct MlmConfig {
    int dim = 64;
    int heads = 4;
    int blocks = 2;
    int ff_mult = 4;
    int max_len = 128;
    double init_std = 0.05;
};

struct MlmTrainConfig {
    int epochs = 200;
    int batch_size = 16;
    double lr = 1e-2;
    double momentum = 0.95;
    double eta = 0.7;
    bool language_markers = false;
};

namespace detail {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

struct TensorRef {
    std::string name;
    double* data;
    std::size_t size;
};

struct MlmBlockParams {
    RowVectorXd ln1_g, ln1_b;
    MatrixXd wq, wk, wv, wo;
    RowVectorXd bq, bk, bv, bo;
    RowVectorXd ln2_g, ln2_b;
    MatrixXd w1;
    RowVectorXd b1;
    MatrixXd w2;
    RowVectorXd b2;
};

struct MlmParams {
    MatrixXd tok_emb;  // V x d, also the tied output projection
    MatrixXd pos_emb;  // max_len x d
    std::vector<MlmBlockParams> blocks;
    RowVectorXd lnf_g, lnf_b;
    RowVectorXd out_b;  // V

    static MlmParams shaped(int vocab_size, const MlmConfig& cfg) {
        MlmParams p;
        const int d = cfg.dim, f = cfg.ff_mult * cfg.dim;
        p.tok_emb = MatrixXd::Zero(vocab_size, d);
        p.pos_emb = MatrixXd::Zero(cfg.max_len, d);
        p.blocks.resize(static_cast<std::size_t>(cfg.blocks));
        for (auto& b : p.blocks) {
            b.ln1_g = RowVectorXd::Ones(d);
            b.ln1_b = RowVectorXd::Zero(d);
            b.wq = MatrixXd::Zero(d, d);
            b.wk = MatrixXd::Zero(d, d);
            b.wv = MatrixXd::Zero(d, d);
            b.wo = MatrixXd::Zero(d, d);
            b.bq = RowVectorXd::Zero(d);
            b.bk = RowVectorXd::Zero(d);
            b.bv = RowVectorXd::Zero(d);
            b.bo = RowVectorXd::Zero(d);
            b.ln2_g = RowVectorXd::Ones(d);
            b.ln2_b = RowVectorXd::Zero(d);
            b.w1 = MatrixXd::Zero(d, f);
            b.b1 = RowVectorXd::Zero(f);
            b.w2 = MatrixXd::Zero(f, d);
            b.b2 = RowVectorXd::Zero(d);
        }
        p.lnf_g = RowVectorXd::Ones(d);
        p.lnf_b = RowVectorXd::Zero(d);
        p.out_b = RowVectorXd::Zero(vocab_size);
        return p;
    }

    void set_zero() {
        for (auto& t : tensor_refs())
            for (std::size_t i = 0; i < t.size; ++i) t.data[i] = 0.0;
    }

    std::vector<TensorRef> tensor_refs() {
        std::vector<TensorRef> refs;
        auto push = [&](const std::string& name, auto& m) {
            refs.push_back({name, m.data(), static_cast<std::size_t>(m.size())});
        };
        push("tok_emb", tok_emb);
        push("pos_emb", pos_emb);
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            auto& b = blocks[i];
            const std::string p = "block" + std::to_string(i) + ".";
            push(p + "ln1_g", b.ln1_g);
            push(p + "ln1_b", b.ln1_b);
            push(p + "wq", b.wq);
            push(p + "wk", b.wk);
            push(p + "wv", b.wv);
            push(p + "wo", b.wo);
            push(p + "bq", b.bq);
            push(p + "bk", b.bk);
            push(p + "bv", b.bv);
            push(p + "bo", b.bo);
            push(p + "ln2_g", b.ln2_g);
            push(p + "ln2_b", b.ln2_b);
            push(p + "w1", b.w1);
            push(p + "b1", b.b1);
            push(p + "w2", b.w2);
            push(p + "b2", b.b2);
        }
        push("lnf_g", lnf_g);
        push("lnf_b", lnf_b);
        push("out_b", out_b);
        return refs;
    }
};

constexpr double kLnEps = 1e-5;

struct LnCache {
    MatrixXd xhat;
    VectorXd inv_sigma;
};

inline MatrixXd layer_norm(const MatrixXd& x, const RowVectorXd& g, const RowVectorXd& b,
                           LnCache& cache) {
    const auto d = static_cast<double>(x.cols());
    const VectorXd mean = x.rowwise().mean();
    MatrixXd centered = x;
    centered.colwise() -= mean;
    const VectorXd var = centered.array().square().rowwise().sum() / d;
    cache.inv_sigma = (var.array() + kLnEps).rsqrt();
    cache.xhat = (centered.array().colwise() * cache.inv_sigma.array()).matrix();
    MatrixXd y = (cache.xhat.array().rowwise() * g.array()).matrix();
    y.rowwise() += b;
    return y;
}

// dY -> dX; accumulates dg/db.
inline MatrixXd layer_norm_backward(const MatrixXd& dy, const RowVectorXd& g,
                                    const LnCache& cache, RowVectorXd& dg, RowVectorXd& db) {
    const auto d = static_cast<double>(dy.cols());
    dg += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    db += dy.colwise().sum();
    const MatrixXd dxhat = (dy.array().rowwise() * g.array()).matrix();
    const VectorXd m1 = dxhat.rowwise().sum() / d;
    const VectorXd m2 = (dxhat.array() * cache.xhat.array()).rowwise().sum() / d;
    MatrixXd dx = dxhat;
    dx.colwise() -= m1;
    dx -= (cache.xhat.array().colwise() * m2.array()).matrix();
    return (dx.array().colwise() * cache.inv_sigma.array()).matrix();
}

constexpr double kInvSqrt2 = 0.7071067811865476;

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

inline double gelu_grad(double x) {
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

struct BlockCache {
    MatrixXd x_in;
    LnCache ln1;
    MatrixXd a, q, k, v;
    std::vector<MatrixXd> probs;  // per head, L x L
    MatrixXd ctx;
    MatrixXd x_mid;
    LnCache ln2;
    MatrixXd c, u, g;
};

struct ForwardCache {
    std::vector<int> ids;
    MatrixXd x0;
    std::vector<BlockCache> blocks;
    LnCache lnf;
    MatrixXd x_final;
    MatrixXd hidden;  // L x d after final norm
};

}  // namespace detail

// An encoded fine-tuning / generation example: item ids with masks applied
// plus (position, target id) pairs for the masked slots.
struct MlmExample {
    std::vector<int> ids;
    std::vector<std::pair<std::size_t, int>> targets;
};

// Trainable masked LM: token + learned positional embeddings, a stack of
// pre-norm encoder blocks (multi-head self-attention and a GELU feed-forward,
// both with residual connections), a final layer norm, and an output
// projection tied to the token embeddings. All math in double precision.
class TinyMlm : public MlmBackend {
public:
    TinyMlm(Vocabulary vocab, MlmConfig cfg, uint64_t seed)
        : vocab_(std::move(vocab)), cfg_(cfg) {
        if (cfg_.dim % cfg_.heads != 0) throw TrainingError("model dim must divide into heads");
        params_ = detail::MlmParams::shaped(static_cast<int>(vocab_.size()), cfg_);
        RandomStream rng(seed);
        for (auto& t : params_.tensor_refs()) {
            if (t.name.find("ln") != std::string::npos || t.name.find(".b") != std::string::npos ||
                t.name == "out_b")
                continue;  // norms stay at identity, biases at zero
            for (std::size_t i = 0; i < t.size; ++i)
                t.data[i] = rng.gaussian(0.0, cfg_.init_std);
        }
    }

    const Vocabulary& vocab() const override { return vocab_; }
    const MlmConfig& config() const { return cfg_; }
    const std::vector<double>& loss_history() const { return loss_history_; }

    MlmExample make_example(const MaskPlan& plan) const {
        MlmExample ex;
        ex.ids = vocab_.encode_plan(plan);
        if (ex.ids.size() > static_cast<std::size_t>(cfg_.max_len))
            throw LengthError("sequence of " + std::to_string(ex.ids.size()) +
                              " items exceeds model maximum " + std::to_string(cfg_.max_len));
        for (std::size_t p : plan.masked_positions)
            ex.targets.emplace_back(p, vocab_.id(plan.targets.at(p)));
        return ex;
    }

    std::vector<std::vector<double>> predict(const MaskPlan& plan) const override {
        const MlmExample ex = make_example(plan);
        detail::ForwardCache cache;
        run_forward(ex.ids, cache);
        std::vector<std::vector<double>> out;
        out.reserve(ex.targets.size());
        for (const auto& [pos, target] : ex.targets) {
            (void)target;
            Eigen::RowVectorXd logits =
                cache.hidden.row(static_cast<Eigen::Index>(pos)) * params_.tok_emb.transpose() +
                params_.out_b;
            out.push_back(softmax_row(logits));
        }
        return out;
    }

    // Mean negative log-likelihood over all masked positions in the batch.
    double batch_loss(const std::vector<MlmExample>& batch) const {
        double nll = 0.0;
        std::size_t count = 0;
        for (const auto& ex : batch) {
            detail::ForwardCache cache;
            run_forward(ex.ids, cache);
            nll += sequence_nll(ex, cache);
            count += ex.targets.size();
        }
        if (count == 0) throw TrainingError("batch has no masked positions");
        return nll / static_cast<double>(count);
    }

    double batch_loss_and_grads(const std::vector<MlmExample>& batch, detail::MlmParams& grads) {
        grads.set_zero();
        std::size_t count = 0;
        for (const auto& ex : batch) count += ex.targets.size();
        if (count == 0) throw TrainingError("batch has no masked positions");
        const double inv_count = 1.0 / static_cast<double>(count);
        double nll = 0.0;
        for (const auto& ex : batch) {
            detail::ForwardCache cache;
            run_forward(ex.ids, cache);
            nll += sequence_nll(ex, cache);
            run_backward(ex, cache, inv_count, grads);
        }
        return nll * inv_count;
    }

    // Fine-tunes on entity-masked linearized sentences. Masks are re-drawn at
    // the start of every epoch. Returns the per-epoch mean masked-token NLL.
    std::vector<double> finetune(const Corpus& corpus, const MlmTrainConfig& train,
                                 RandomStream& rng) {
        if (corpus.entity_token_count() == 0)
            throw TrainingError("corpus has no entity tokens to fine-tune on");
        std::vector<LinearizedSequence> seqs;
        std::size_t too_long = 0;
        for (const auto& s : corpus.sentences) {
            if (!s.has_entity()) continue;
            auto seq = linearize(s, train.language_markers);
            if (seq.items.size() > static_cast<std::size_t>(cfg_.max_len)) {
                ++too_long;
                continue;
            }
            seqs.push_back(std::move(seq));
        }
        if (seqs.empty())
            throw TrainingError("no usable training sequences (" + std::to_string(too_long) +
                                " exceeded the model maximum length)");

        detail::MlmParams grads = detail::MlmParams::shaped(static_cast<int>(vocab_.size()), cfg_);
        detail::MlmParams velocity =
            detail::MlmParams::shaped(static_cast<int>(vocab_.size()), cfg_);
        auto grad_refs = grads.tensor_refs();
        auto vel_refs = velocity.tensor_refs();
        auto param_refs = params_.tensor_refs();

        std::vector<std::size_t> order(seqs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

        loss_history_.clear();
        for (int epoch = 0; epoch < train.epochs; ++epoch) {
            rng.shuffle(order);
            double epoch_nll = 0.0;
            std::size_t epoch_masked = 0;
            std::vector<MlmExample> batch;
            auto step = [&](void) {
                if (batch.empty()) return;
                std::size_t masked = 0;
                for (const auto& ex : batch) masked += ex.targets.size();
                const double loss = batch_loss_and_grads(batch, grads);
                epoch_nll += loss * static_cast<double>(masked);
                epoch_masked += masked;
                for (std::size_t t = 0; t < param_refs.size(); ++t) {
                    double* p = param_refs[t].data;
                    double* g = grad_refs[t].data;
                    double* v = vel_refs[t].data;
                    for (std::size_t i = 0; i < param_refs[t].size; ++i) {
                        v[i] = train.momentum * v[i] + g[i];
                        p[i] -= train.lr * v[i];
                        if (!std::isfinite(p[i]))
                            throw TrainingError("non-finite parameter in " + param_refs[t].name +
                                                " after update");
                    }
                }
                batch.clear();
            };
            for (std::size_t i : order) {
                auto plan = finetune_mask(seqs[i], train.eta, rng);
                batch.push_back(make_example(*plan));
                if (batch.size() == static_cast<std::size_t>(train.batch_size)) step();
            }
            step();
            loss_history_.push_back(epoch_nll / static_cast<double>(epoch_masked));
        }
        return loss_history_;
    }

    // Copies the embedding of a semantically related word onto each label
    // marker of the mapped class, e.g. {"ORG": "organization"} seeds ⟨B-ORG⟩
    // and ⟨I-ORG⟩ with the row of "organization". Missing words are skipped.
    void init_label_embeddings(const std::map<std::string, std::string>& label_words) {
        for (const auto& [cls, word] : label_words) {
            if (!vocab_.contains(word)) continue;
            const int word_id = vocab_.id(word);
            for (const Tag& tag : {Tag::b(cls), Tag::i(cls)}) {
                const std::string marker = render_label_marker(tag);
                if (!vocab_.contains(marker)) continue;
                params_.tok_emb.row(vocab_.id(marker)) = params_.tok_emb.row(word_id);
            }
        }
    }

    std::vector<detail::TensorRef> tensor_refs() { return params_.tensor_refs(); }

    Eigen::RowVectorXd token_embedding(int id) const {
        return params_.tok_emb.row(id);
    }

    void save(std::ostream& out) const;
    static TinyMlm load(std::istream& in);

private:
    void run_forward(const std::vector<int>& ids, detail::ForwardCache& cache) const {
        using namespace detail;
        const auto L = static_cast<Eigen::Index>(ids.size());
        const int d = cfg_.dim, H = cfg_.heads, dh = d / H;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

        cache.ids = ids;
        cache.x0.resize(L, d);
        for (Eigen::Index i = 0; i < L; ++i)
            cache.x0.row(i) = params_.tok_emb.row(ids[static_cast<std::size_t>(i)]) +
                              params_.pos_emb.row(i);

        MatrixXd x = cache.x0;
        cache.blocks.assign(params_.blocks.size(), BlockCache{});
        for (std::size_t bi = 0; bi < params_.blocks.size(); ++bi) {
            const auto& bp = params_.blocks[bi];
            auto& bc = cache.blocks[bi];
            bc.x_in = x;
            bc.a = layer_norm(x, bp.ln1_g, bp.ln1_b, bc.ln1);
            bc.q = bc.a * bp.wq;
            bc.q.rowwise() += bp.bq;
            bc.k = bc.a * bp.wk;
            bc.k.rowwise() += bp.bk;
            bc.v = bc.a * bp.wv;
            bc.v.rowwise() += bp.bv;
            bc.probs.assign(static_cast<std::size_t>(H), MatrixXd());
            bc.ctx.resize(L, d);
            for (int h = 0; h < H; ++h) {
                const auto qh = bc.q.middleCols(h * dh, dh);
                const auto kh = bc.k.middleCols(h * dh, dh);
                const auto vh = bc.v.middleCols(h * dh, dh);
                MatrixXd scores = qh * kh.transpose() * scale;
                MatrixXd& probs = bc.probs[static_cast<std::size_t>(h)];
                probs.resize(L, L);
                for (Eigen::Index r = 0; r < L; ++r) {
                    Eigen::RowVectorXd row = scores.row(r);
                    const double mx = row.maxCoeff();
                    row = (row.array() - mx).exp();
                    probs.row(r) = row / row.sum();
                }
                bc.ctx.middleCols(h * dh, dh) = probs * vh;
            }
            MatrixXd o = bc.ctx * bp.wo;
            o.rowwise() += bp.bo;
            bc.x_mid = x + o;
            bc.c = layer_norm(bc.x_mid, bp.ln2_g, bp.ln2_b, bc.ln2);
            bc.u = bc.c * bp.w1;
            bc.u.rowwise() += bp.b1;
            bc.g = bc.u.unaryExpr([](double v) { return gelu(v); });
            MatrixXd y = bc.g * bp.w2;
            y.rowwise() += bp.b2;
            x = bc.x_mid + y;
        }
        cache.x_final = x;
        cache.hidden = layer_norm(x, params_.lnf_g, params_.lnf_b, cache.lnf);
    }

    static std::vector<double> softmax_row(const Eigen::RowVectorXd& logits) {
        const double mx = logits.maxCoeff();
        Eigen::RowVectorXd e = (logits.array() - mx).exp();
        e /= e.sum();
        return std::vector<double>(e.data(), e.data() + e.size());
    }

    double sequence_nll(const MlmExample& ex, const detail::ForwardCache& cache) const {
        double nll = 0.0;
        for (const auto& [pos, target] : ex.targets) {
            Eigen::RowVectorXd logits =
                cache.hidden.row(static_cast<Eigen::Index>(pos)) * params_.tok_emb.transpose() +
                params_.out_b;
            const double mx = logits.maxCoeff();
            const double lse = mx + std::log((logits.array() - mx).exp().sum());
            nll += lse - logits(target);
        }
        return nll;
    }

    void run_backward(const MlmExample& ex, const detail::ForwardCache& cache, double scale,
                      detail::MlmParams& grads) const {
        using namespace detail;
        const auto L = static_cast<Eigen::Index>(ex.ids.size());
        const int d = cfg_.dim, H = cfg_.heads, dh = d / H;
        const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

        // Head: only masked rows carry gradient.
        MatrixXd d_hidden = MatrixXd::Zero(L, d);
        for (const auto& [pos, target] : ex.targets) {
            const auto r = static_cast<Eigen::Index>(pos);
            Eigen::RowVectorXd logits =
                cache.hidden.row(r) * params_.tok_emb.transpose() + params_.out_b;
            const double mx = logits.maxCoeff();
            Eigen::RowVectorXd p = (logits.array() - mx).exp();
            p /= p.sum();
            p(target) -= 1.0;
            p *= scale;  // d nll / d logits
            d_hidden.row(r) = p * params_.tok_emb;
            grads.tok_emb += p.transpose() * cache.hidden.row(r);
            grads.out_b += p;
        }

        MatrixXd dx = layer_norm_backward(d_hidden, params_.lnf_g, cache.lnf, grads.lnf_g,
                                          grads.lnf_b);

        for (std::size_t bi = params_.blocks.size(); bi-- > 0;) {
            const auto& bp = params_.blocks[bi];
            const auto& bc = cache.blocks[bi];
            auto& bg = grads.blocks[bi];

            // FFN branch
            const MatrixXd& dy = dx;
            bg.w2 += bc.g.transpose() * dy;
            bg.b2 += dy.colwise().sum();
            const MatrixXd du =
                ((dy * bp.w2.transpose()).array() *
                 bc.u.unaryExpr([](double v) { return gelu_grad(v); }).array())
                    .matrix();
            bg.w1 += bc.c.transpose() * du;
            bg.b1 += du.colwise().sum();
            MatrixXd dc = du * bp.w1.transpose();
            MatrixXd dx_mid =
                dx + layer_norm_backward(dc, bp.ln2_g, bc.ln2, bg.ln2_g, bg.ln2_b);

            // Attention branch
            const MatrixXd& do_ = dx_mid;
            MatrixXd dctx = do_ * bp.wo.transpose();
            bg.wo += bc.ctx.transpose() * do_;
            bg.bo += do_.colwise().sum();

            MatrixXd dq = MatrixXd::Zero(L, d), dk = MatrixXd::Zero(L, d),
                     dv = MatrixXd::Zero(L, d);
            for (int h = 0; h < H; ++h) {
                const auto qh = bc.q.middleCols(h * dh, dh);
                const auto kh = bc.k.middleCols(h * dh, dh);
                const auto vh = bc.v.middleCols(h * dh, dh);
                const MatrixXd& probs = bc.probs[static_cast<std::size_t>(h)];
                const auto dctx_h = dctx.middleCols(h * dh, dh);
                MatrixXd dprobs = dctx_h * vh.transpose();
                dv.middleCols(h * dh, dh) = probs.transpose() * dctx_h;
                // softmax rows
                MatrixXd dscores(L, L);
                for (Eigen::Index r = 0; r < L; ++r) {
                    const double dot = dprobs.row(r).dot(probs.row(r));
                    dscores.row(r) =
                        (probs.row(r).array() * (dprobs.row(r).array() - dot)).matrix();
                }
                dscores *= att_scale;
                dq.middleCols(h * dh, dh) = dscores * kh;
                dk.middleCols(h * dh, dh) = dscores.transpose() * qh;
            }
            MatrixXd da = dq * bp.wq.transpose() + dk * bp.wk.transpose() +
                          dv * bp.wv.transpose();
            bg.wq += bc.a.transpose() * dq;
            bg.wk += bc.a.transpose() * dk;
            bg.wv += bc.a.transpose() * dv;
            bg.bq += dq.colwise().sum();
            bg.bk += dk.colwise().sum();
            bg.bv += dv.colwise().sum();

            dx = dx_mid + layer_norm_backward(da, bp.ln1_g, bc.ln1, bg.ln1_g, bg.ln1_b);
        }

        for (Eigen::Index i = 0; i < L; ++i) {
            grads.tok_emb.row(ex.ids[static_cast<std::size_t>(i)]) += dx.row(i);
            grads.pos_emb.row(i) += dx.row(i);
        }
    }

    Vocabulary vocab_;
    MlmConfig cfg_;
    detail::MlmParams params_;
    std::vector<double> loss_history_;
};

// Deterministic test backend: distributions keyed by the masked position's
// nearest surface neighbours and enclosing label marker; uniform fallback.
class StubBackend : public MlmBackend {
public:
    explicit StubBackend(Vocabulary vocab) : vocab_(std::move(vocab)) {}

    const Vocabulary& vocab() const override { return vocab_; }

    void add_entry(const std::string& left, const std::string& right, const std::string& marker,
                   const std::vector<std::pair<std::string, double>>& weights) {
        std::vector<double> dist(vocab_.size(), 0.0);
        double total = 0.0;
        for (const auto& [token, w] : weights) {
            if (!vocab_.contains(token))
                throw DataError("stub entry token '" + token + "' is not in the vocabulary");
            dist[static_cast<std::size_t>(vocab_.id(token))] += w;
            total += w;
        }
        if (total <= 0.0) throw DataError("stub entry has no probability mass");
        for (double& v : dist) v /= total;
        table_[{left, right, marker}] = std::move(dist);
    }

    std::vector<std::vector<double>> predict(const MaskPlan& plan) const override {
        std::vector<std::vector<double>> out;
        out.reserve(plan.masked_positions.size());
        for (std::size_t pos : plan.masked_positions) {
            const auto key = context_key(plan.base, pos);
            auto it = table_.find(key);
            if (it != table_.end()) {
                out.push_back(it->second);
            } else {
                out.emplace_back(vocab_.size(), 1.0 / static_cast<double>(vocab_.size()));
            }
        }
        return out;
    }

    static std::tuple<std::string, std::string, std::string> context_key(
        const LinearizedSequence& seq, std::size_t pos) {
        std::string left, right, marker;
        for (std::size_t i = pos; i-- > 0;) {
            if (seq.items[i].kind == ItemKind::surface) {
                left = seq.items[i].text;
                break;
            }
        }
        for (std::size_t i = pos + 1; i < seq.items.size(); ++i) {
            if (seq.items[i].kind == ItemKind::surface) {
                right = seq.items[i].text;
                break;
            }
        }
        for (std::size_t i = pos; i-- > 0;) {
            if (seq.items[i].kind == ItemKind::label_marker) {
                marker = seq.items[i].text;
                break;
            }
            if (seq.items[i].kind == ItemKind::surface) break;
        }
        return {left, right, marker};
    }

private:
    Vocabulary vocab_;
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> table_;
};

// ---- checkpoint io ---------------------------------------------------------
// Versioned text format; tensor values are written as C hex floats so a
// loaded model reproduces predictions bit for bit.

inline void TinyMlm::save(std::ostream& out) const {
    out << "melm-mlm 1\n";
    out << "dims " << cfg_.dim << " " << cfg_.heads << " " << cfg_.blocks << " " << cfg_.ff_mult
        << " " << cfg_.max_len << "\n";
    out << "vocab " << vocab_.size() << "\n";
    for (const auto& t : vocab_.id_to_token) out << t << "\n";
    auto refs = const_cast<TinyMlm*>(this)->params_.tensor_refs();
    char buf[64];
    for (const auto& t : refs) {
        out << "tensor " << t.name << " " << t.size << "\n";
        for (std::size_t i = 0; i < t.size; ++i) {
            std::snprintf(buf, sizeof(buf), "%a", t.data[i]);
            out << buf << (i + 1 == t.size ? "\n" : " ");
        }
    }
    out << "end\n";
}

inline TinyMlm TinyMlm::load(std::istream& in) {
    std::string word;
    int version = 0;
    in >> word >> version;
    if (!in || word != "melm-mlm" || version != 1)
        throw CheckpointError("not a recognized model checkpoint");
    MlmConfig cfg;
    in >> word;
    if (word != "dims") throw CheckpointError("checkpoint missing dims");
    in >> cfg.dim >> cfg.heads >> cfg.blocks >> cfg.ff_mult >> cfg.max_len;
    std::size_t vocab_size = 0;
    in >> word >> vocab_size;
    if (!in || word != "vocab") throw CheckpointError("checkpoint missing vocabulary");
    Vocabulary vocab;
    for (std::size_t i = 0; i < vocab_size; ++i) {
        std::string token;
        in >> token;
        if (!in) throw CheckpointError("truncated vocabulary");
        const bool is_marker = token.rfind(kMarkerOpen, 0) == 0;
        vocab.add(token, is_marker);
    }
    if (!vocab.contains(Vocabulary::unk_token()) || !vocab.contains(Vocabulary::mask_token()) ||
        !vocab.contains(Vocabulary::pad_token()))
        throw CheckpointError("checkpoint vocabulary lacks special tokens");
    vocab.unk_id = vocab.id(Vocabulary::unk_token());
    vocab.mask_id = vocab.id(Vocabulary::mask_token());
    vocab.pad_id = vocab.id(Vocabulary::pad_token());

    TinyMlm model(std::move(vocab), cfg, /*seed=*/0);
    for (auto& t : model.params_.tensor_refs()) {
        std::size_t size = 0;
        in >> word;
        if (word != "tensor") throw CheckpointError("expected tensor record");
        in >> word >> size;
        if (word != t.name || size != t.size)
            throw CheckpointError("checkpoint tensor mismatch: expected " + t.name);
        for (std::size_t i = 0; i < size; ++i) {
            std::string v;
            in >> v;
            if (!in) throw CheckpointError("truncated tensor " + t.name);
            t.data[i] = std::strtod(v.c_str(), nullptr);
        }
    }
    in >> word;
    if (word != "end") throw CheckpointError("checkpoint missing end marker");
    return model;
}

}  // namespace melm
