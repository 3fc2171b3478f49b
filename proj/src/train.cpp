#include "dmfnet/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dmfnet {

float lr_at(const TrainConfig& cfg, int epoch) {
    if (cfg.base_lr <= 0.0f || cfg.gamma <= 0.0f || cfg.gamma > 1.0f)
        throw Error("lr_at: base_lr must be > 0 and gamma in (0, 1]");
    if (cfg.step_fraction <= 0.0 || cfg.step_fraction >= 1.0)
        throw Error("lr_at: step_fraction must be in (0, 1)");
    if (epoch < 0 || epoch >= cfg.epochs) throw Error("lr_at: epoch out of range");
    int step_len = std::max(1, static_cast<int>(cfg.step_fraction * cfg.epochs));
    int k = epoch / step_len;
    return static_cast<float>(cfg.base_lr * std::pow(static_cast<double>(cfg.gamma), k));
}

void sgd_step(ParamBundle& params, const GradBundle& grads, GradBundle& velocity, float lr,
              float momentum, float weight_decay) {
    for (const auto& [name, g] : grads) {
        Tensor& w = params.at(name);
        if (!w.same_dims(g))
            throw Error("sgd_step: gradient dims " + g.dims_str() + " do not match parameter '" +
                        name + "' " + w.dims_str());
        auto [it, inserted] = velocity.try_emplace(name, Tensor(g.n, g.c, g.h, g.w));
        Tensor& v = it->second;
        for (size_t i = 0; i < w.size(); ++i) {
            v.v[i] = momentum * v.v[i] - lr * (g.v[i] + weight_decay * w.v[i]);
            w.v[i] += v.v[i];
        }
    }
}

std::string ConfusionMatrix::to_text() const {
    std::ostringstream os;
    os << "                 predicted\n";
    os << "                 genuine   copied\n";
    os << "actual genuine  " << std::setw(8) << counts[0][0] << "  " << std::setw(7)
       << counts[0][1] << "\n";
    os << "actual copied   " << std::setw(8) << counts[1][0] << "  " << std::setw(7)
       << counts[1][1] << "\n";
    return os.str();
}

EvalResult evaluate(const NetworkGraph& graph, const ParamBundle& params, const PatchSet& data,
                    int batch_size) {
    if (data.count == 0) throw Error("evaluate: empty patch set");
    if (batch_size < 1) throw Error("evaluate: batch_size must be >= 1");
    EvalResult r;
    const size_t pp = static_cast<size_t>(data.patch) * data.patch;
    constexpr float kScale = 1.0f / 255.0f;

    std::map<int, std::pair<int, double>> image_votes;  // image_id -> (label, sum of logit diffs)
    std::map<int, int> image_copied_votes, image_total_votes;

    for (size_t start = 0; start < data.count; start += static_cast<size_t>(batch_size)) {
        const size_t n = std::min<size_t>(batch_size, data.count - start);
        Tensor x(static_cast<int>(n), 1, data.patch, data.patch);
        for (size_t j = 0; j < n; ++j) {
            const uint8_t* px = data.pixels.data() + (start + j) * pp;
            float* dst = x.data() + j * pp;
            for (size_t k = 0; k < pp; ++k) dst[k] = static_cast<float>(px[k]) * kScale;
        }
        auto out = forward_eval(graph, params, x);
        for (size_t j = 0; j < n; ++j) {
            float l0 = out.logits.v[j * 2];
            float l1 = out.logits.v[j * 2 + 1];
            int pred = l1 > l0 ? 1 : 0;
            int actual = data.labels[start + j];
            r.patch_cm.counts[actual][pred] += 1;
            int img = data.image_ids[start + j];
            image_votes[img] = {actual, image_votes[img].second + (l1 - l0)};
            image_total_votes[img] += 1;
            image_copied_votes[img] += pred;
        }
    }
    r.patch_accuracy = r.patch_cm.accuracy();

    for (const auto& [img, av] : image_votes) {
        int copied = image_copied_votes[img];
        int total = image_total_votes[img];
        int pred;
        if (2 * copied != total)
            pred = (2 * copied > total) ? 1 : 0;
        else
            pred = av.second > 0.0 ? 1 : 0;  // vote tie: fall back to summed logit margin
        r.image_cm.counts[av.first][pred] += 1;
    }
    r.image_accuracy = r.image_cm.accuracy();
    return r;
}

TrainResult train(const NetworkGraph& graph, const PatchSet& train_data,
                  const PatchSet& val_data, const TrainConfig& cfg, const TrainOutputs& outputs,
                  const KvMap& checkpoint_extra) {
    if (train_data.count == 0) throw Error("train: empty training data");
    if (cfg.epochs < 1) throw Error("train: epochs must be >= 1");
    auto t0 = std::chrono::steady_clock::now();

    TrainResult result;
    ParamBundle params = init_params(graph, cfg.seed);
    GradBundle velocity;

    std::ofstream log_csv;
    if (!outputs.log_csv.empty()) {
        log_csv.open(outputs.log_csv);
        if (!log_csv) throw Error("train: cannot open log '" + outputs.log_csv + "'");
        log_csv << "epoch,lr,train_loss,val_accuracy\n";
    }

    result.best_val_accuracy = -1.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const float lr = lr_at(cfg, epoch);
        BatchIterator it(train_data, cfg.batch_size, cfg.seed, epoch);
        Batch batch;
        double loss_sum = 0.0;
        long seen = 0;
        int batch_index = 0;
        while (it.next(batch)) {
            auto step = train_step(graph, params, batch.x, batch.labels);
            if (!std::isfinite(step.loss))
                throw Error("train: non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch " + std::to_string(batch_index));
            GradBundle grads = std::move(step.grads);
            for (const auto& frozen_name : graph.frozen) grads.erase(frozen_name);
            sgd_step(params, grads, velocity, lr, cfg.momentum, cfg.weight_decay);
            loss_sum += static_cast<double>(step.loss) * batch.x.n;
            seen += batch.x.n;
            ++batch_index;
        }

        EpochLog row;
        row.epoch = epoch;
        row.lr = lr;
        row.train_loss = loss_sum / static_cast<double>(seen);
        if (val_data.count > 0)
            row.val_accuracy = evaluate(graph, params, val_data, cfg.batch_size).patch_accuracy;
        result.log.push_back(row);
        if (log_csv) {
            log_csv << row.epoch << "," << std::setprecision(9) << row.lr << ","
                    << std::setprecision(12) << row.train_loss << "," << row.val_accuracy << "\n";
            log_csv.flush();
        }
        if (row.val_accuracy > result.best_val_accuracy) {
            result.best_val_accuracy = row.val_accuracy;
            result.best_epoch = epoch;
            result.best_params = params;
        }
    }
    result.final_params = std::move(params);
    auto t1 = std::chrono::steady_clock::now();
    result.seconds = std::chrono::duration<double>(t1 - t0).count();

    KvMap extra = checkpoint_extra;
    extra["epochs"] = std::to_string(cfg.epochs);
    extra["batch_size"] = std::to_string(cfg.batch_size);
    extra["seed"] = std::to_string(cfg.seed);
    extra["best_epoch"] = std::to_string(result.best_epoch);
    if (!outputs.best_checkpoint.empty())
        save_checkpoint(outputs.best_checkpoint, result.best_params, graph.config, extra);
    if (!outputs.final_checkpoint.empty())
        save_checkpoint(outputs.final_checkpoint, result.final_params, graph.config, extra);
    return result;
}

namespace {

AblationRow run_row(const std::string& label, const NetworkConfig& net_cfg,
                    const SplitData& data, const TrainConfig& cfg) {
    AblationRow row;
    row.label = label;
    try {
        auto graph = build_dmfnet(net_cfg);
        row.params = param_count(graph);
        auto tr = train(graph, data.train, data.val, cfg);
        auto ev = evaluate(graph, tr.best_params, data.val, cfg.batch_size);
        row.accuracy = ev.patch_accuracy;
        row.cm = ev.patch_cm;
        row.seconds = tr.seconds;
        row.ok = true;
    } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
    }
    return row;
}

}  // namespace

std::vector<AblationRow> run_ablation_brb(const SplitData& data, const TrainConfig& cfg) {
    std::vector<AblationRow> rows;
    for (int count : {1, 2, 3}) {
        NetworkConfig net;
        net.single_branch = true;
        net.branch_a = {0, count};
        rows.push_back(run_row(std::to_string(count), net, data, cfg));
    }
    return rows;
}

std::vector<AblationRow> run_ablation_prep(const SplitData& data, const TrainConfig& cfg) {
    struct PrepRow {
        const char* label;
        int prep_a, prep_b;
    };
    // the grid rows of the preprocessing-layer experiment, labels as printed
    const PrepRow grid[] = {
        {"No preprocessing layers", 0, 0},
        {"One 3x3 preprocessing layer", 3, 0},
        {"One 5x5 preprocessing layer", 5, 0},
        {"Two 3x3 preprocessing layers", 3, 3},
        {"One 3x3 preprocessing layers, One 5x5 preprocessing layers", 3, 5},
        {"Two 5x5 preprocessing layers", 5, 5},
    };
    std::vector<AblationRow> rows;
    for (const auto& g : grid) {
        NetworkConfig net;
        net.branch_a = {g.prep_a, 2};
        net.branch_b = {g.prep_b, 2};
        rows.push_back(run_row(g.label, net, data, cfg));
    }
    return rows;
}

namespace {

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::ostringstream os;
    os << "label,accuracy,params,seconds\n";
    for (const auto& r : rows) {
        os << csv_quote(r.label) << ",";
        if (r.ok)
            os << std::fixed << std::setprecision(4) << r.accuracy;
        else
            os << "error";
        os << "," << r.params << "," << std::fixed << std::setprecision(1) << r.seconds << "\n";
    }
    return os.str();
}

std::string ablation_text(const std::vector<AblationRow>& rows, uint64_t split_hash) {
    std::ostringstream os;
    os << "shared split hash: " << std::hex << split_hash << std::dec << "\n\n";
    size_t width = 5;
    for (const auto& r : rows) width = std::max(width, r.label.size());
    for (const auto& r : rows) {
        os << std::left << std::setw(static_cast<int>(width) + 2) << r.label;
        if (r.ok) {
            os << "accuracy " << std::fixed << std::setprecision(4) << r.accuracy << "  params "
               << r.params << "  " << std::setprecision(1) << r.seconds << "s\n";
            os << r.cm.to_text();
        } else {
            os << "FAILED: " << r.error << "\n";
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace dmfnet
