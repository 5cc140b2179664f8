#include "bdf/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "bdf/errors.hpp"
#include "bdf/ops.hpp"
#include "bdf/rng.hpp"

namespace bdf {

namespace {

/// Flat views over all parameter tensors, in a fixed order shared by the
/// gradient accumulator and the momentum state.
std::vector<Tensor*> param_tensors(ModelParams& p) {
    return {&p.conv1.w, &p.conv1.b, &p.conv2.w, &p.conv2.b,
            &p.conv3.w, &p.conv3.b, &p.fc.w,    &p.fc.b};
}

std::vector<Tensor*> grad_tensors(ParamGrads& g) {
    return {&g.conv1.w, &g.conv1.b, &g.conv2.w, &g.conv2.b,
            &g.conv3.w, &g.conv3.b, &g.fc.w,    &g.fc.b};
}

int predict(const ModelParams& params, const Tensor& image) {
    const Tensor logits = forward(params, image).logits;
    int best = 0;
    for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
        if (logits.at(i) > logits.at(best)) best = i;  // ties keep the lower index
    }
    return best;
}

}  // namespace

TrainResult train(const ModelParams& params_init, const Dataset& train_set,
                  const TrainConfig& cfg) {
    if (train_set.size() == 0) {
        throw EvalError("train: dataset is empty");
    }
    if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.learning_rate < 0.0f ||
        cfg.momentum < 0.0f || cfg.momentum >= 1.0f) {
        throw ConfigError("train: epochs and batch_size must be positive, momentum in [0,1)");
    }

    TrainResult result;
    result.params = params_init;
    auto params = param_tensors(result.params);

    std::vector<Tensor> velocity;
    velocity.reserve(params.size());
    for (const Tensor* t : params) velocity.emplace_back(t->shape);

    Rng rng(cfg.rng_seed);
    const int n = static_cast<int>(train_set.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        float epoch_loss = 0.0f;
        int batches = 0;

        for (int start = 0; start < n; start += cfg.batch_size) {
            const int end = std::min(start + cfg.batch_size, n);
            const int bsz = end - start;

            ParamGrads acc;
            float batch_loss = 0.0f;
            bool first = true;
            for (int bi = start; bi < end; ++bi) {
                const int idx = order[static_cast<std::size_t>(bi)];
                const Tensor& img = train_set.images[static_cast<std::size_t>(idx)];
                const int label = train_set.labels[static_cast<std::size_t>(idx)];

                XentResult xe;
                ParamGrads g;
                try {
                    const ForwardTrace trace = forward(result.params, img);
                    xe = softmax_xent(trace.logits, label);
                    g = backward_params(result.params, trace, xe.d_logits);
                } catch (const NumericError&) {
                    throw TrainingError("train: loss diverged at epoch " +
                                        std::to_string(epoch) + " batch " +
                                        std::to_string(batches));
                }
                batch_loss += xe.loss;
                if (first) {
                    acc = std::move(g);
                    first = false;
                } else {
                    auto acc_t = grad_tensors(acc);
                    auto g_t = grad_tensors(g);
                    for (std::size_t ti = 0; ti < acc_t.size(); ++ti) {
                        for (std::size_t j = 0; j < acc_t[ti]->size(); ++j) {
                            acc_t[ti]->data[j] += g_t[ti]->data[j];
                        }
                    }
                }
            }
            batch_loss /= static_cast<float>(bsz);
            if (!std::isfinite(batch_loss)) {
                throw TrainingError("train: loss diverged at epoch " + std::to_string(epoch) +
                                    " batch " + std::to_string(batches));
            }
            epoch_loss += batch_loss;
            ++batches;

            const float scale = 1.0f / static_cast<float>(bsz);
            auto acc_t = grad_tensors(acc);
            for (std::size_t ti = 0; ti < params.size(); ++ti) {
                Tensor& v = velocity[ti];
                Tensor& w = *params[ti];
                const Tensor& g = *acc_t[ti];
                for (std::size_t j = 0; j < w.size(); ++j) {
                    v.data[j] = cfg.momentum * v.data[j] + g.data[j] * scale;
                    w.data[j] -= cfg.learning_rate * v.data[j];
                }
            }
        }
        result.loss_history.push_back(epoch_loss / static_cast<float>(batches));
    }
    return result;
}

double accuracy(const ModelParams& params, const Dataset& test_set) {
    if (test_set.size() == 0) {
        throw EvalError("accuracy: dataset is empty");
    }
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
        if (predict(params, test_set.images[i]) == test_set.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test_set.size());
}

double attack_success_rate(const ModelParams& params, const Dataset& test_set,
                           const TriggerSpec& trigger, const TriggerSpec* pre_stamp) {
    std::int64_t hits = 0;
    std::int64_t considered = 0;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
        if (test_set.labels[i] == trigger.target_label) continue;  // never in the denominator
        Tensor img = test_set.images[i];
        if (pre_stamp != nullptr) img = stamp(img, *pre_stamp);
        img = stamp(img, trigger);
        if (predict(params, img) == trigger.target_label) ++hits;
        ++considered;
    }
    if (considered == 0) {
        throw EvalError("attack_success_rate: every sample has the target label");
    }
    return static_cast<double>(hits) / static_cast<double>(considered);
}

EvalReport evaluate_all(const ModelParams& params, const Dataset& test_set,
                        const TriggerSet& triggers, std::optional<double> threshold_used) {
    EvalReport r;
    r.clean_accuracy = accuracy(params, test_set);
    r.n_eval = static_cast<int>(test_set.size());
    r.threshold_used = threshold_used;
    if (triggers.original) {
        r.sr_clean_ori = attack_success_rate(params, test_set, *triggers.original);
    }
    if (triggers.synthetic) {
        r.sr_clean_syn = attack_success_rate(params, test_set, *triggers.synthetic);
        if (triggers.original) {
            r.sr_clean_ori_syn =
                attack_success_rate(params, test_set, *triggers.synthetic, &*triggers.original);
        }
    }
    return r;
}

std::string eval_report_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["clean_accuracy"] = report.clean_accuracy;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) {
            j[key] = *v;
        } else {
            j[key] = nullptr;
        }
    };
    put("sr_clean_ori", report.sr_clean_ori);
    put("sr_clean_syn", report.sr_clean_syn);
    put("sr_clean_ori_syn", report.sr_clean_ori_syn);
    j["n_eval"] = report.n_eval;
    put("threshold_used", report.threshold_used);
    return j.dump(2) + "\n";
}

void save_eval_report(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw FormatError("eval report: cannot open " + path.string() + " for writing");
    }
    f << eval_report_json(report);
}

void save_loss_history(const std::vector<float>& loss_history,
                       const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) {
        throw FormatError("loss history: cannot open " + path.string() + " for writing");
    }
    f << "epoch,mean_loss\n";
    char buf[64];
    for (std::size_t i = 0; i < loss_history.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i, static_cast<double>(loss_history[i]));
        f << buf;
    }
}

}  // namespace bdf
