// dmfnet command line: data generation, training, evaluation, ablation
// grids, gradient checking and network inspection.
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "dmfnet/checkpoint.hpp"
#include "dmfnet/dataset.hpp"
#include "dmfnet/gradcheck.hpp"
#include "dmfnet/network.hpp"
#include "dmfnet/synth.hpp"
#include "dmfnet/train.hpp"

namespace {

using namespace dmfnet;

struct SplitOptions {
    std::string mode = "image";  // image: group-level; patch: per-patch
    double fraction = 0.8;
    uint64_t seed = 0;
};

SplitData load_split(const std::string& data_dir, const SplitOptions& opt) {
    auto manifest = read_manifest(data_dir + "/manifest.txt");
    SplitData out;
    if (opt.mode == "image") {
        auto [train_m, val_m] = split_manifest(manifest, opt.fraction, opt.seed);
        out.train = load_patches(train_m, data_dir);
        out.val = load_patches(val_m, data_dir);
        std::vector<int> val_groups;
        for (const auto& r : val_m.records) val_groups.push_back(r.group_id);
        out.hash = split_hash(val_groups);
    } else {
        auto all = load_patches(manifest, data_dir);
        auto [train_p, val_p] = split_patches(all, opt.fraction, opt.seed);
        out.train = std::move(train_p);
        out.val = std::move(val_p);
        out.hash = split_hash(out.val.image_ids);
    }
    return out;
}

SynthConfig synth_config_from_file(const std::string& path) {
    SynthConfig cfg;
    std::ifstream is(path);
    if (!is) throw Error("cannot open synth config '" + path + "'");
    std::string line;
    while (std::getline(is, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos || line.empty() || line[0] == '#') continue;
        std::string k = line.substr(0, eq), v = line.substr(eq + 1);
        if (k == "module_px") cfg.module_px = std::stoi(v);
        else if (k == "genuine_blur_sigma") cfg.genuine_blur_sigma = std::stof(v);
        else if (k == "capture_blur_sigma_lo") cfg.capture_blur_sigma_lo = std::stof(v);
        else if (k == "capture_blur_sigma_hi") cfg.capture_blur_sigma_hi = std::stof(v);
        else if (k == "copy_scan_blur_sigma") cfg.copy_scan_blur_sigma = std::stof(v);
        else if (k == "burr_density") cfg.burr_density = std::stof(v);
        else if (k == "burr_amplitude") cfg.burr_amplitude = std::stoi(v);
        else if (k == "noise_std_genuine") cfg.noise_std_genuine = std::stof(v);
        else if (k == "noise_std_copied") cfg.noise_std_copied = std::stof(v);
        else if (k == "requantize_levels") cfg.requantize_levels = std::stoi(v);
        else if (k == "image_size") cfg.image_size = std::stoi(v);
        else if (k == "master_seed" || k == "n_codes" || k == "copies_per_code") continue;
        else throw Error("unknown synth config key '" + k + "'");
    }
    return cfg;
}

void print_inspect(const NetworkGraph& graph) {
    std::printf("%-22s %-16s %-14s %-14s %10s\n", "layer", "type", "in", "out", "params");
    for (const auto& row : graph.table) {
        char in[32], out[32];
        std::snprintf(in, sizeof(in), "%dx%dx%d", row.in_c, row.in_h, row.in_w);
        std::snprintf(out, sizeof(out), "%dx%dx%d", row.out_c, row.out_h, row.out_w);
        std::printf("%-22s %-16s %-14s %-14s %10ld\n", row.name.c_str(), row.kind.c_str(), in,
                    out, row.params);
    }
    std::printf("total learnable parameters: %ld\n", param_count(graph));
}

int run(int argc, char** argv) {
    CLI::App app{"DMF-Net: copy-forgery identification of anti-counterfeiting QR codes"};
    app.require_subcommand(1);

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic copy-forgery corpus");
    std::string gen_out;
    int gen_codes = 20, gen_copies = 5;
    uint64_t gen_seed = 0;
    std::string gen_config;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--codes", gen_codes, "number of distinct codes (>= 2)")
        ->check(CLI::Range(2, 100000));
    gen->add_option("--copies", gen_copies, "genuine captures and copies per code")
        ->check(CLI::Range(1, 100000));
    gen->add_option("--seed", gen_seed, "master seed");
    gen->add_option("--config", gen_config, "synth config file (key=value)")
        ->check(CLI::ExistingFile);

    // ---- train ----
    auto* tr = app.add_subcommand("train", "train DMF-Net on a corpus directory");
    std::string tr_data, tr_out, tr_split = "image", tr_order = "conv-relu-bn";
    int tr_prep_a = 3, tr_prep_b = 5, tr_brbs = 2;
    TrainConfig tr_cfg;
    double tr_fraction = 0.8;
    bool tr_single = false, tr_freeze_prep = false;
    tr->add_option("--data", tr_data, "corpus directory (with manifest.txt)")->required();
    tr->add_option("--out", tr_out, "best-checkpoint path")->required();
    tr->add_option("--prep-a", tr_prep_a, "branch A preprocessing kernel (0=none, 3, 5)")
        ->check(CLI::IsMember({0, 3, 5}));
    tr->add_option("--prep-b", tr_prep_b, "branch B preprocessing kernel (0=none, 3, 5)")
        ->check(CLI::IsMember({0, 3, 5}));
    tr->add_option("--brbs", tr_brbs, "bottleneck blocks per branch")
        ->check(CLI::IsMember({1, 2, 3}));
    tr->add_option("--epochs", tr_cfg.epochs, "training periods")->check(CLI::Range(1, 100000));
    tr->add_option("--lr", tr_cfg.base_lr, "base learning rate");
    tr->add_option("--gamma", tr_cfg.gamma, "step-down multiplier");
    tr->add_option("--step-fraction", tr_cfg.step_fraction, "step size as a fraction of epochs");
    tr->add_option("--batch", tr_cfg.batch_size, "batch size")->check(CLI::Range(1, 8192));
    tr->add_option("--momentum", tr_cfg.momentum, "SGD momentum");
    tr->add_option("--weight-decay", tr_cfg.weight_decay, "L2 coefficient");
    tr->add_option("--seed", tr_cfg.seed, "run seed (init, shuffle, split)");
    tr->add_option("--split", tr_split, "split granularity")
        ->check(CLI::IsMember({"image", "patch"}));
    tr->add_option("--train-fraction", tr_fraction, "train share of the split")
        ->check(CLI::Range(0.01, 0.99));
    tr->add_flag("--single-branch", tr_single, "train branch A alone");
    tr->add_flag("--freeze-prep", tr_freeze_prep, "fix the preprocessing layer high-pass kernel");
    tr->add_option("--order", tr_order, "layer order within a conv unit")
        ->check(CLI::IsMember({"conv-relu-bn", "conv-bn-relu"}));

    // ---- eval ----
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint; prints the confusion matrix");
    std::string ev_data, ev_ckpt, ev_subset = "val";
    ev->add_option("--data", ev_data, "corpus directory")->required();
    ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
    ev->add_option("--subset", ev_subset, "which side of the recorded split to evaluate")
        ->check(CLI::IsMember({"val", "train", "all"}));

    // ---- ablate ----
    auto* ab = app.add_subcommand("ablate", "run an ablation grid");
    std::string ab_data, ab_grid, ab_out;
    TrainConfig ab_cfg;
    double ab_fraction = 0.8;
    ab->add_option("--data", ab_data, "corpus directory")->required();
    ab->add_option("--grid", ab_grid, "grid name")->required()->check(CLI::IsMember({"brb", "prep"}));
    ab->add_option("--seed", ab_cfg.seed, "shared seed for every row");
    ab->add_option("--epochs", ab_cfg.epochs, "training periods per row");
    ab->add_option("--batch", ab_cfg.batch_size, "batch size");
    ab->add_option("--lr", ab_cfg.base_lr, "base learning rate");
    ab->add_option("--train-fraction", ab_fraction, "train share of the split");
    ab->add_option("--out", ab_out, "output prefix (default ablation_<grid>)");

    // ---- gradcheck ----
    auto* gc = app.add_subcommand("gradcheck", "finite-difference checks for every operator");
    uint64_t gc_seed = 1;
    int gc_seeds = 5;
    std::string gc_flip;
    gc->add_option("--seed", gc_seed, "first seed");
    gc->add_option("--seeds", gc_seeds, "number of seeds")->check(CLI::Range(1, 1000));
    gc->add_option("--inject-flip", gc_flip, "negate one operator's backward (checker self-test)")
        ->group("");  // hidden

    // ---- inspect ----
    auto* in = app.add_subcommand("inspect", "print the layer table and parameter counts");
    int in_prep_a = 3, in_prep_b = 5, in_brbs = 2;
    bool in_single = false;
    std::string in_order = "conv-relu-bn";
    in->add_option("--prep-a", in_prep_a)->check(CLI::IsMember({0, 3, 5}));
    in->add_option("--prep-b", in_prep_b)->check(CLI::IsMember({0, 3, 5}));
    in->add_option("--brbs", in_brbs)->check(CLI::IsMember({1, 2, 3}));
    in->add_flag("--single-branch", in_single);
    in->add_option("--order", in_order)->check(CLI::IsMember({"conv-relu-bn", "conv-bn-relu"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // 1 for every usage error, 0 for --help
    }

    if (gen->parsed()) {
        SynthConfig cfg = gen_config.empty() ? SynthConfig{} : synth_config_from_file(gen_config);
        cfg.master_seed = gen_seed;
        auto result = gen_corpus(cfg, gen_codes, gen_copies, gen_out);
        std::cout << "wrote " << result.manifest.records.size() << " images to " << gen_out
                  << "\n";
        std::cout << result.report.to_string();
        return 0;
    }

    if (tr->parsed()) {
        NetworkConfig net;
        net.branch_a = {tr_prep_a, tr_brbs};
        net.branch_b = {tr_prep_b, tr_brbs};
        net.single_branch = tr_single;
        net.prep_trainable = !tr_freeze_prep;
        net.order = tr_order == "conv-bn-relu" ? LayerOrder::ConvBnRelu : LayerOrder::ConvReluBn;
        auto graph = build_dmfnet(net);

        std::cout << "config: lr=" << tr_cfg.base_lr << " epochs=" << tr_cfg.epochs << " prep="
                  << tr_prep_a << "/" << (tr_single ? std::string("-") : std::to_string(tr_prep_b))
                  << " brbs=" << tr_brbs << " batch=" << tr_cfg.batch_size << " momentum="
                  << tr_cfg.momentum << " seed=" << tr_cfg.seed << " split=" << tr_split
                  << " params=" << param_count(graph) << "\n";

        SplitOptions opt{tr_split, tr_fraction, tr_cfg.seed};
        auto data = load_split(tr_data, opt);
        std::cout << "train patches: " << data.train.count << ", val patches: " << data.val.count
                  << ", split hash: " << std::hex << data.hash << std::dec << "\n";

        KvMap extra;
        extra["split_mode"] = tr_split;
        extra["split_seed"] = std::to_string(tr_cfg.seed);
        extra["train_fraction"] = std::to_string(tr_fraction);
        std::stringstream hash_ss;
        hash_ss << std::hex << data.hash;
        extra["split_hash"] = hash_ss.str();

        TrainOutputs outputs;
        outputs.best_checkpoint = tr_out;
        outputs.final_checkpoint = tr_out + ".final";
        outputs.log_csv = tr_out + ".log.csv";
        auto result = train(graph, data.train, data.val, tr_cfg, outputs, extra);
        for (const auto& row : result.log)
            std::cout << "epoch " << row.epoch << "  lr " << row.lr << "  loss " << row.train_loss
                      << "  val_acc " << std::fixed << std::setprecision(4) << row.val_accuracy
                      << std::defaultfloat << "\n";
        std::cout << "best val accuracy " << std::fixed << std::setprecision(4)
                  << result.best_val_accuracy << " at epoch " << result.best_epoch << " ("
                  << std::setprecision(1) << result.seconds << "s)\n";
        std::cout << "checkpoints: " << outputs.best_checkpoint << " (best), "
                  << outputs.final_checkpoint << " (final), log " << outputs.log_csv << "\n";
        return 0;
    }

    if (ev->parsed()) {
        auto ckpt = load_checkpoint(ev_ckpt);
        auto graph = build_dmfnet(ckpt.config);
        check_bundle(graph, ckpt.params);

        PatchSet subset;
        bool has_split = ckpt.extra.count("split_mode") != 0;
        if (ev_subset == "all" || !has_split) {
            subset = load_patches(read_manifest(ev_data + "/manifest.txt"), ev_data);
        } else {
            SplitOptions opt;
            opt.mode = ckpt.extra.at("split_mode");
            opt.seed = std::stoull(ckpt.extra.at("split_seed"));
            opt.fraction = std::stod(ckpt.extra.at("train_fraction"));
            auto data = load_split(ev_data, opt);
            subset = ev_subset == "val" ? std::move(data.val) : std::move(data.train);
        }
        auto result = evaluate(graph, ckpt.params, subset);
        std::cout << "patch-level confusion matrix (" << subset.count << " patches):\n"
                  << result.patch_cm.to_text();
        std::cout << "accuracy " << std::fixed << std::setprecision(4) << result.patch_accuracy
                  << "\n\n";
        std::cout << "image-level majority vote (" << result.image_cm.total() << " images):\n"
                  << result.image_cm.to_text();
        std::cout << "accuracy " << std::fixed << std::setprecision(4) << result.image_accuracy
                  << "\n";
        return 0;
    }

    if (ab->parsed()) {
        SplitOptions opt{"image", ab_fraction, ab_cfg.seed};
        auto data = load_split(ab_data, opt);
        auto rows = ab_grid == "brb" ? run_ablation_brb(data, ab_cfg)
                                     : run_ablation_prep(data, ab_cfg);
        std::string prefix = ab_out.empty() ? "ablation_" + ab_grid : ab_out;
        std::ofstream csv(prefix + ".csv");
        csv << ablation_csv(rows);
        std::ofstream txt(prefix + ".txt");
        txt << ablation_text(rows, data.hash);
        std::cout << ablation_text(rows, data.hash);
        std::cout << "wrote " << prefix << ".csv and " << prefix << ".txt\n";
        for (const auto& r : rows)
            if (!r.ok) return 2;
        return 0;
    }

    if (gc->parsed()) {
        bool all_pass = true;
        std::vector<OpCheckReport> reports;
        if (!gc_flip.empty()) {
            reports = run_gradient_suite(gc_seed, gc_flip);
        } else {
            reports = run_gradient_suite_multi(gc_seed, gc_seeds);
        }
        std::printf("%-24s %14s %12s  %s\n", "operator", "max rel err", "tolerance", "status");
        for (const auto& r : reports) {
            std::printf("%-24s %14.3e %12.1e  %s\n", r.op.c_str(), r.max_rel_err, r.tolerance,
                        r.pass ? "pass" : "FAIL");
            all_pass = all_pass && r.pass;
        }
        return all_pass ? 0 : 2;
    }

    if (in->parsed()) {
        NetworkConfig net;
        net.branch_a = {in_prep_a, in_brbs};
        net.branch_b = {in_prep_b, in_brbs};
        net.single_branch = in_single;
        net.order = in_order == "conv-bn-relu" ? LayerOrder::ConvBnRelu : LayerOrder::ConvReluBn;
        print_inspect(build_dmfnet(net));
        return 0;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
