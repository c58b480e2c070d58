#include "sdnn/ablation.hpp"
#include "sdnn/checkpoint.hpp"
#include "sdnn/config.hpp"
#include "sdnn/data.hpp"
#include "sdnn/fewshot.hpp"
#include "sdnn/grad_suite.hpp"
#include "sdnn/tensor.hpp"
#include "sdnn/train.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

namespace {

using namespace sdnn;

std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig load_config(const std::string& path)
{
    return path.empty() ? RunConfig{} : parse_run_config(read_text(path));
}

// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw Error("cannot write " + path);
    }
}

struct SynthArgs {
    std::uint32_t classes = 8;
    std::uint32_t base = 0; // 0: half of the classes
    std::uint32_t val = 0;
    std::uint32_t per_class = 60;
    std::uint32_t size = 32;
    std::uint32_t channels = 3;
    float pixel_noise = SynthSpec{}.pixel_noise_std;
    std::uint64_t seed = 1;
    std::string out;
};

int cmd_synth(const SynthArgs& a)
{
    SynthSpec spec;
    spec.num_classes = a.classes;
    spec.base_classes = a.base == 0 ? a.classes / 2 : a.base;
    spec.val_classes = a.val;
    spec.samples_per_class = a.per_class;
    spec.height = spec.width = a.size;
    spec.channels = a.channels;
    spec.pixel_noise_std = a.pixel_noise;
    spec.seed = a.seed;
    const FewShotDataset ds = synth_generate(spec);
    write_fsds(ds, a.out);
    std::fprintf(stderr, "wrote %zu images (%u classes: %zu base, %zu val, %zu novel) to %s\n", ds.size(),
                 a.classes, ds.classes_in(Split::base).size(), ds.classes_in(Split::val).size(),
                 ds.classes_in(Split::novel).size(), a.out.c_str());
    return 0;
}

struct PretrainArgs {
    std::string config;
    std::string data;
    std::string out;
    std::string log;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
};

int cmd_pretrain(const PretrainArgs& a)
{
    RunConfig cfg = load_config(a.config);
    if (a.seed) {
        cfg.train.seed = *a.seed;
    }
    if (a.epochs) {
        cfg.train.epochs = *a.epochs;
    }
    cfg.validate();
    const FewShotDataset ds = load_fsds(a.data);
    SdnnModel model = build_model(cfg, ds);

    std::ofstream log_file;
    if (!a.log.empty()) {
        log_file.open(a.log, std::ios::binary);
        if (!log_file) {
            throw Error("cannot write " + a.log);
        }
    }
    fit(model, ds, cfg.train, [&](const EpochLog& entry) {
        const std::string line = entry.to_json_line();
        std::fprintf(stderr, "%s\n", line.c_str());
        if (log_file.is_open()) {
            log_file << line << '\n';
            log_file.flush();
        }
    });
    save_checkpoint(model, a.out);
    std::fprintf(stderr, "checkpoint written to %s\n", a.out.c_str());
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string config;
    std::string out;
    std::optional<std::size_t> n_way, k_shot, m_query, episodes;
    std::optional<std::uint64_t> seed;
};

int cmd_eval(const EvalArgs& a)
{
    const RunConfig cfg = load_config(a.config);
    EpisodeSpec spec;
    spec.n_way = a.n_way.value_or(cfg.eval.n_way);
    spec.k_shot = a.k_shot.value_or(cfg.eval.k_shot);
    spec.m_query = a.m_query.value_or(cfg.eval.m_query);
    spec.num_episodes = a.episodes.value_or(cfg.eval.episodes);
    spec.seed = a.seed.value_or(cfg.eval.seed);
    const SdnnModel model = load_checkpoint(a.checkpoint);
    const FewShotDataset ds = load_fsds(a.data);
    const EvalReport report = evaluate(model, ds, spec);
    std::fprintf(stderr, "%zu-way %zu-shot over %zu episodes: %.4f +- %.4f\n", spec.n_way, spec.k_shot,
                 spec.num_episodes, report.mean_acc, report.ci95);
    emit(a.out, report.to_json() + "\n");
    return 0;
}

struct AblateArgs {
    std::string data;
    std::string preset;
    std::string config;
    std::string out;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::size_t episodes = 500;
    std::size_t jobs = 1;
    bool one_shot_only = false;
};

int cmd_ablate(const AblateArgs& a)
{
    const RunConfig base = load_config(a.config);
    const FewShotDataset ds = load_fsds(a.data);
    const auto cells = ablation_preset(a.preset, base);
    AblationOptions options;
    options.seeds = a.seeds;
    options.episodes = a.episodes;
    options.jobs = a.jobs;
    options.five_shot = !a.one_shot_only;
    options.log = [](const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); };
    std::string csv = ablation_csv_header() + "\n";
    for (const AblationRow& row : run_ablation(ds, a.preset, cells, options)) {
        csv += to_csv_line(row) + "\n";
    }
    emit(a.out, csv);
    return 0;
}

struct GradcheckArgs {
    std::uint64_t seed = 1;
    std::size_t instances = 20;
    std::size_t end_to_end_instances = 20;
    std::string corrupt;
};

int cmd_gradcheck(const GradcheckArgs& a)
{
    constexpr float op_tolerance = 1e-3f;
    constexpr float model_tolerance = 1e-2f;
    detail::set_backward_fault(a.corrupt);
    bool ok = true;
    std::printf("%-24s %9s %11s %8s %12s %12s  %s\n", "op", "instances", "coordinates", "kinks", "rel_err",
                "max_coord", "result");
    auto print = [&](const GradSuiteRow& row, float tolerance) {
        const bool pass = row.relative_error < tolerance && row.coordinates > 0;
        ok = ok && pass;
        std::printf("%-24s %9zu %11zu %8zu %12.3e %12.3e  %s\n", row.name.c_str(), row.instances, row.coordinates,
                    row.skipped_kinks, row.relative_error, row.max_relative_error, pass ? "pass" : "FAIL");
    };
    for (const GradSuiteRow& row : op_gradient_suite(a.seed, a.instances)) {
        print(row, op_tolerance);
    }
    if (a.end_to_end_instances > 0) {
        print(end_to_end_gradient_suite(a.seed, a.end_to_end_instances), model_tolerance);
    }
    detail::set_backward_fault("");
    std::printf("%s\n", ok ? "all gradients pass" : "gradient check FAILED");
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Self-denoising neural networks for few-shot learning"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic few-shot dataset (FSDS file)");
    synth_cmd->add_option("--classes", synth.classes, "Number of classes")->check(CLI::Range(2u, 65535u));
    synth_cmd->add_option("--base", synth.base, "Base classes (default: half)");
    synth_cmd->add_option("--val", synth.val, "Validation classes");
    synth_cmd->add_option("--per-class", synth.per_class, "Images per class")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--size", synth.size, "Image height and width")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--channels", synth.channels, "Image channels")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--pixel-noise", synth.pixel_noise, "Per-pixel noise std in [0,1] units");
    synth_cmd->add_option("--seed", synth.seed, "Generator seed");
    synth_cmd->add_option("-o,--out", synth.out, "Output path")->required();

    PretrainArgs pretrain;
    auto* pretrain_cmd = app.add_subcommand("pretrain", "Train an SDNN on the base classes");
    pretrain_cmd->add_option("-c,--config", pretrain.config, "RunConfig JSON (defaults when omitted)");
    pretrain_cmd->add_option("-d,--data", pretrain.data, "FSDS dataset")->required();
    pretrain_cmd->add_option("-o,--out", pretrain.out, "Checkpoint path")->required();
    pretrain_cmd->add_option("--log", pretrain.log, "Also write the per-epoch JSON lines here");
    pretrain_cmd->add_option("--seed", pretrain.seed, "Override train.seed");
    pretrain_cmd->add_option("--epochs", pretrain.epochs, "Override train.epochs");

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Episodic N-way K-shot evaluation on the novel classes");
    eval_cmd->add_option("-m,--checkpoint", eval.checkpoint, "Checkpoint path")->required();
    eval_cmd->add_option("-d,--data", eval.data, "FSDS dataset")->required();
    eval_cmd->add_option("-c,--config", eval.config, "RunConfig JSON supplying eval defaults");
    eval_cmd->add_option("--n-way", eval.n_way);
    eval_cmd->add_option("--k-shot", eval.k_shot);
    eval_cmd->add_option("--m-query", eval.m_query);
    eval_cmd->add_option("--episodes", eval.episodes);
    eval_cmd->add_option("--seed", eval.seed);
    eval_cmd->add_option("-o,--out", eval.out, "Report path (stdout when omitted)");

    AblateArgs ablate;
    auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate an ablation grid");
    ablate_cmd->add_option("-d,--data", ablate.data, "FSDS dataset")->required();
    ablate_cmd->add_option("-p,--preset", ablate.preset, "aux_noise | spatial | sigma | pdrop | placement")
        ->required();
    ablate_cmd->add_option("-c,--config", ablate.config, "Base RunConfig JSON");
    ablate_cmd->add_option("--seeds", ablate.seeds, "Seeds shared by every cell")->delimiter(',');
    ablate_cmd->add_option("--episodes", ablate.episodes, "Episodes per evaluation");
    ablate_cmd->add_option("-j,--jobs", ablate.jobs, "Worker threads");
    ablate_cmd->add_flag("--one-shot-only", ablate.one_shot_only, "Skip the 5-shot evaluation");
    ablate_cmd->add_option("-o,--out", ablate.out, "CSV path (stdout when omitted)");

    GradcheckArgs grad;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
    grad_cmd->add_option("--seed", grad.seed);
    grad_cmd->add_option("--instances", grad.instances, "Random instances per op");
    grad_cmd->add_option("--model-instances", grad.end_to_end_instances, "Random end-to-end instances (0 skips)");
    grad_cmd->add_option("--corrupt", grad.corrupt, "Scale this op's backward rule (test hook)")->group("");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth_cmd) {
            return cmd_synth(synth);
        }
        if (*pretrain_cmd) {
            return cmd_pretrain(pretrain);
        }
        if (*eval_cmd) {
            return cmd_eval(eval);
        }
        if (*ablate_cmd) {
            return cmd_ablate(ablate);
        }
        return cmd_gradcheck(grad);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
