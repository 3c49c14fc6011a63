#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "duodet/augment/pipeline.hpp"
#include "duodet/model/checkpoint.hpp"
#include "duodet/model/model.hpp"
#include "duodet/traineval/config.hpp"
#include "duodet/traineval/dataset.hpp"

namespace duodet {

/// Loss values of one optimizer step, as written to the training log.
struct StepRecord {
    int step = 0;
    int epoch = 0;
    double main = 0;
    double pre_rgb = 0;
    double pre_tir = 0;
    double post = 0;
    double total = 0;

    nlohmann::json to_json() const
    {
        return {{"step", step},       {"epoch", epoch}, {"L_main", main}, {"L_pre_rgb", pre_rgb},
                {"L_pre_tir", pre_tir}, {"L_post", post}, {"total", total}};
    }
};

struct TrainResult {
    ModelParams<float> params;
    ModelConfig model;
    std::vector<StepRecord> steps;
    std::filesystem::path checkpoint;
};

/// Stochastic gradient descent with momentum and L2 decay. Only parameters
/// that received a gradient this step move.
template <typename T>
class SgdMomentum {
public:
    SgdMomentum(double lr, double momentum, double weight_decay) : lr_(lr), momentum_(momentum), decay_(weight_decay) {}

    void step(ModelParams<T>& params, const std::map<std::string, Tensor<T>>& grads)
    {
        for (const auto& [name, g] : grads) {
            auto& p = params[name];
            auto [it, inserted] = velocity_.try_emplace(name, Tensor<T>(p.shape));
            auto& v = it->second;
            for (std::size_t i = 0; i < p.numel(); ++i) {
                const T gi = g[i] + static_cast<T>(decay_) * p[i];
                v[i] = static_cast<T>(momentum_) * v[i] + gi;
                p[i] -= static_cast<T>(lr_) * v[i];
            }
        }
    }

private:
    double lr_;
    double momentum_;
    double decay_;
    std::map<std::string, Tensor<T>> velocity_;
};

/// Forward + loss of one batch in training mode. Auxiliary heads whose weight
/// is zero are not evaluated at all.
template <typename T>
Var training_loss(ForwardContext<T>& ctx, const ModelConfig& cfg, const std::vector<PairedSample>& batch,
                  StepRecord& rec)
{
    auto& tape = ctx.tape;
    std::vector<const Image*> rgb, tir;
    std::vector<TargetMap> targets;
    for (const auto& s : batch) {
        rgb.push_back(&s.rgb);
        tir.push_back(&s.tir);
        targets.push_back(assign_targets(s.boxes, grids_for_input(s.height(), s.width())));
    }
    const AuxSelection aux{cfg.aux_weights.pre > 0, cfg.aux_weights.post > 0};
    auto r = model_forward(ctx, cfg, tape.constant(images_to_tensor<T>(rgb)), tape.constant(images_to_tensor<T>(tir)),
                           aux);
    LossComponents lc;
    Var main = detection_loss(tape, r.main, targets, &lc);
    rec.main = lc.total;
    Var zero = tape.constant(Tensor<T>({1}, T(0)));
    Var pre_rgb = zero, pre_tir = zero, post = zero;
    if (r.aux_pre_rgb) {
        pre_rgb = detection_loss(tape, *r.aux_pre_rgb, targets, &lc);
        rec.pre_rgb = lc.total;
        pre_tir = detection_loss(tape, *r.aux_pre_tir, targets, &lc);
        rec.pre_tir = lc.total;
    }
    if (r.aux_post) {
        post = detection_loss(tape, *r.aux_post, targets, &lc);
        rec.post = lc.total;
    }
    Var total = total_loss(tape, main, pre_rgb, pre_tir, post, cfg.aux_weights);
    rec.total = tape.value(total)[0];
    return total;
}

using StepObserver = std::function<void(const StepRecord&)>;

/// Desk-scale training loop over in-memory samples. Deterministic for a given
/// (samples, config): batch order, augmentation and initialization all derive
/// from `cfg.seed`.
inline TrainResult train(const std::vector<PairedSample>& samples, TrainConfig cfg, const StepObserver& observer = {},
                         std::optional<ModelParams<float>> initial = std::nullopt)
{
    validate(cfg);
    if (samples.empty()) {
        throw ValidationError("train: manifest has no training samples");
    }
    if (cfg.model.num_classes <= 0) {
        throw ValidationError("train: model.num_classes unresolved");
    }

    std::vector<PairedSample> data;
    data.reserve(samples.size());
    for (const auto& s : samples) {
        data.push_back(resize_sample(s, cfg.input_size, cfg.input_size));
    }

    TrainResult result;
    result.model = cfg.model;
    result.params = initial ? std::move(*initial) : init_params<float>(cfg.model, cfg.seed);
    SgdMomentum<float> opt(cfg.learning_rate, cfg.momentum, cfg.weight_decay);

    const std::filesystem::path dir = cfg.checkpoint_dir;
    std::ofstream log;
    if (!cfg.checkpoint_dir.empty()) {
        std::filesystem::create_directories(dir);
        log.open(dir / "train_log.jsonl");
        result.checkpoint = dir / "last.ckpt";
    }

    int step = 0;
    const int n = static_cast<int>(data.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        RngStream shuffle(cfg.seed, static_cast<std::uint64_t>(epoch), ~0ULL);
        for (int i = n - 1; i > 0; --i) {
            std::swap(order[i], order[shuffle.uniform_int(0, i)]);
        }
        for (int start = 0; start < n; start += cfg.batch_size) {
            std::vector<PairedSample> batch;
            for (int k = start; k < std::min(n, start + cfg.batch_size); ++k) {
                auto s = apply_pipeline(data[order[k]], cfg.aug, static_cast<std::uint64_t>(epoch),
                                        static_cast<std::uint64_t>(order[k]), data);
                batch.push_back(resize_sample(s, cfg.input_size, cfg.input_size));
            }
            Tape<float> tape;
            ForwardContext<float> ctx{tape, result.params, true};
            StepRecord rec;
            rec.step = step;
            rec.epoch = epoch;
            Var total = training_loss(ctx, cfg.model, batch, rec);
            if (!std::isfinite(rec.total)) {
                if (log.is_open()) {
                    log << nlohmann::json{{"step", step}, {"error", "non-finite loss"}}.dump() << '\n';
                }
                throw RuntimeFailure("non-finite loss at step " + std::to_string(step));
            }
            tape.backward(total);
            opt.step(result.params, tape.param_grads());
            result.steps.push_back(rec);
            if (log.is_open()) {
                log << rec.to_json().dump() << '\n';
                log.flush();
            }
            if (observer) {
                observer(rec);
            }
            ++step;
            if (cfg.max_steps > 0 && step >= cfg.max_steps) {
                break;
            }
        }
        if (!cfg.checkpoint_dir.empty()) {
            save_checkpoint(result.checkpoint, result.params, cfg.model, cfg.input_size);
        }
        if (cfg.max_steps > 0 && step >= cfg.max_steps) {
            break;
        }
    }
    return result;
}

}   // namespace duodet
