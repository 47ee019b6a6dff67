#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wardwatch/pipeline.hpp"
#include "wardwatch/serve.hpp"

namespace {

using ww::pipeline::PipelineConfig;

// Flags every subcommand shares. --seed moves both the generator and the
// trainer so one knob reseeds a whole run.
struct CommonOpts {
    std::string config;
    std::string data_dir;
    std::int64_t seed = -1;
    bool combined = false;
    bool combined_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config, "pipeline config file (key = value lines)");
    cmd->add_option("--data", opts.data_dir, "artifact directory (overrides the config)");
    cmd->add_option("--seed", opts.seed, "override generator and trainer seeds");
    cmd->add_flag_callback(
        "--combined",
        [&opts] {
            opts.combined = true;
            opts.combined_set = true;
        },
        "train one model on all facilities instead of one per facility");
}

PipelineConfig build_config(const CommonOpts& opts) {
    PipelineConfig cfg;
    if (!opts.config.empty()) cfg = ww::pipeline::load_pipeline_config(opts.config);
    if (!opts.data_dir.empty()) cfg.data_dir = opts.data_dir;
    if (opts.seed >= 0) {
        cfg.synth.seed = static_cast<std::uint64_t>(opts.seed);
        cfg.train.seed = static_cast<std::uint64_t>(opts.seed);
    }
    if (opts.combined_set) cfg.combined = opts.combined;
    return cfg;
}

int run_stage(const CommonOpts& opts,
              std::vector<std::string> (*stage)(const PipelineConfig&)) {
    auto written = stage(build_config(opts));
    for (const auto& path : written) std::cout << path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ward-to-ICU early warning pipeline"};
    app.require_subcommand(1);

    struct Stage {
        const char* name;
        const char* help;
        std::vector<std::string> (*fn)(const PipelineConfig&);
    };
    const Stage stages[] = {
        {"synth", "generate the synthetic EMR extract", &ww::pipeline::run_synth},
        {"cohort", "label admissions and emit scoring instants", &ww::pipeline::run_cohort},
        {"featgen", "build the feature schema, matrix and relational tables",
         &ww::pipeline::run_featgen},
        {"sqlgen", "emit the merge spec and its generated SQL", &ww::pipeline::run_sqlgen},
        {"merge", "evaluate the merge spec against the relational tables",
         &ww::pipeline::run_merge},
        {"train", "fit the boosted-tree model on the training split", &ww::pipeline::run_train},
        {"eval", "score the test split and write the comparison report", &ww::pipeline::run_eval},
        {"explain", "write feature importance and Shapley summaries", &ww::pipeline::run_explain},
        {"all", "run every stage in order", &ww::pipeline::run_all},
    };

    std::vector<CommonOpts> opts(std::size(stages) + 1);
    for (std::size_t i = 0; i < std::size(stages); ++i) {
        CLI::App* cmd = app.add_subcommand(stages[i].name, stages[i].help);
        add_common(cmd, opts[i]);
        const Stage& st = stages[i];
        const CommonOpts& o = opts[i];
        cmd->callback([&st, &o] { run_stage(o, st.fn); });
    }

    CommonOpts& serve_opts = opts.back();
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string facility;
    CLI::App* serve_cmd = app.add_subcommand("serve", "HTTP scoring endpoint for one model");
    add_common(serve_cmd, serve_opts);
    serve_cmd->add_option("--host", host, "listen address");
    serve_cmd->add_option("--port", port, "listen port");
    serve_cmd->add_option("--facility", facility, "serve this facility's model");
    serve_cmd->callback([&] {
        PipelineConfig cfg = build_config(serve_opts);
        ww::pipeline::Artifacts art(cfg);
        auto svc = ww::serve::ScoringService::from_files(art.model(facility), art.schema_csv);
        std::cout << "serving " << art.model(facility) << " on " << host << ":" << port << "\n";
        ww::serve::run_server(&svc, host, port);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
