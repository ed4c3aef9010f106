// Command line over an archive directory. Results go to stdout as JSON (or
// CSV where noted); failures print {"error": {...}} to stderr and exit
// non-zero: 2 for invalid input, 3 for a missing artifact, 1 otherwise.

#include "formix/presets.hpp"
#include "formix/service.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>

using namespace formix;
using io::Json;

namespace {

struct Failure {
    int code;
    std::string type;
    std::string message;
    Json violations;
};

void print(const Json& j) { std::cout << io::dump(j); }

StudyDefinition read_study(const std::string& file) {
    return io::study_from_json(io::parse_json(io::read_file(file), "study"));
}

workflow::ProfileRequest profile_request(const std::string& set, const std::vector<std::string>& weights,
                                         const std::vector<std::string>& anchors) {
    workflow::ProfileRequest r;
    r.set = set;
    r.weights = workflow::parse_weights(weights);
    for (const auto& a : anchors) {
        auto [name, range] = workflow::split_assignment(a);
        auto colon = range.find(':');
        if (colon == std::string::npos) throw ValidationError("anchor must be name=low:high, got '" + a + "'");
        r.anchors[name] = {io::parse_number(range.substr(0, colon), "anchor " + name),
                           io::parse_number(range.substr(colon + 1), "anchor " + name)};
    }
    return r;
}

std::string fs_relative(const Archive& a, const std::filesystem::path& p) {
    return std::filesystem::relative(p, a.dir()).generic_string();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mixture-process formulation workflow: study, design, data, fit, profile, simulate, serve"};
    app.require_subcommand(1);
    std::string archive_dir = ".";
    app.add_option("--archive", archive_dir, "archive directory")->capture_default_str();

    std::function<void()> action;
    auto archive = [&] { return Archive(archive_dir); };

    // ------------------------------------------------------------ study
    auto* study = app.add_subcommand("study", "define and check a study")->require_subcommand(1);
    {
        auto* example = study->add_subcommand("example", "print the worked lipid nanoparticle study");
        example->callback([&] { action = [] { print(io::to_json(presets::lnp_study())); }; });

        static std::string file;
        auto* validate = study->add_subcommand("validate", "check a study file (the archive's study by default)");
        validate->add_option("file", file, "study JSON");
        validate->callback([&] {
            action = [&] {
                auto def = file.empty() ? archive().study() : read_study(file);
                auto report = validate_study(def);
                print(Json{{"valid", report.empty()}, {"violations", io::to_json(report)}});
                if (!report.empty()) throw Failure{2, "validation", "invalid study", io::to_json(report)};
            };
        });

        auto* heur = study->add_subcommand("heuristics", "minimum and maximum run counts");
        heur->add_option("file", file, "study JSON");
        heur->callback([&] {
            action = [&] {
                auto def = file.empty() ? archive().study() : read_study(file);
                require_valid(def);
                print(Json{{"min", min_run_heuristic(def)},
                           {"max", max_run_heuristic(def)},
                           {"second_order_terms", second_order_term_count(def)}});
            };
        });

        static std::string set_file;
        auto* set = study->add_subcommand("set", "store a study in the archive");
        set->add_option("file", set_file, "study JSON")->required();
        set->callback([&] {
            action = [&] {
                auto a = archive();
                auto def = read_study(set_file);
                a.put_study(def);
                print(Json{{"revision", a.revision()}, {"study", io::to_json(def)}});
            };
        });

        auto* show = study->add_subcommand("show", "print the archive's study");
        show->callback([&] { action = [&] { print(io::to_json(archive().study())); }; });
    }

    // ------------------------------------------------------------ design
    auto* design = app.add_subcommand("design", "space-filling designs")->require_subcommand(1);
    {
        static workflow::DesignRequest dr;
        static std::vector<std::string> bench;
        static std::size_t copies = 1;
        static bool keep_order = false;
        auto* gen = design->add_subcommand("generate", "new design over the archive's study");
        gen->add_option("--n", dr.n, "runs before benchmarks (default: minimum heuristic)");
        gen->add_option("--seed", dr.seed)->capture_default_str();
        gen->add_option("--oversample", dr.oversample, "candidate points per run")->capture_default_str();
        gen->add_option("--benchmark", bench, "benchmark setting factor=value (repeat for each factor)");
        gen->add_option("--benchmark-copies", copies, "rows per benchmark")->capture_default_str();
        gen->add_flag("--keep-order", keep_order, "do not randomize run order");
        gen->callback([&] {
            action = [&] {
                auto a = archive();
                if (!bench.empty()) dr.benchmarks.push_back({"benchmark", workflow::parse_settings(a.study(), bench), copies});
                dr.randomize = !keep_order;
                auto d = workflow::make_design(a, dr);
                print(Json{{"revision", a.revision()}, {"report", io::design_report(d)}});
            };
        });

        static std::string prior;
        static std::size_t n = 0, anchors = 0, oversample = 50;
        static std::uint64_t seed = 1;
        auto* aug = design->add_subcommand("augment", "follow-up design reusing runs of a prior archive");
        aug->add_option("--prior", prior, "prior archive directory")->required();
        aug->add_option("--n", n, "new runs")->required();
        aug->add_option("--anchors", anchors, "prior runs to reuse")->capture_default_str();
        aug->add_option("--seed", seed)->capture_default_str();
        aug->add_option("--oversample", oversample)->capture_default_str();
        aug->callback([&] {
            action = [&] {
                auto a = archive();
                auto d = workflow::augment_design(a, Archive(prior), n, anchors, seed, oversample);
                print(Json{{"revision", a.revision()}, {"report", io::design_report(d)}});
            };
        });

        auto* show = design->add_subcommand("show", "print the design CSV");
        show->callback([&] { action = [&] { std::cout << io::table_to_csv(archive().design()); }; });
    }

    // ------------------------------------------------------------ data
    auto* data = app.add_subcommand("data", "experimental results")->require_subcommand(1);
    {
        static std::string file, source;
        auto* imp = data->add_subcommand("import", "import a results CSV against the study");
        imp->add_option("file", file, "CSV with one column per factor and measurement")->required();
        imp->add_option("--source-column", source, "column holding the experiment label");
        imp->callback([&] {
            action = [&] {
                auto a = archive();
                auto t = io::canonical(io::import_csv(io::read_file(file), a.study(), source));
                a.put_data(t, "import");
                print(Json{{"revision", a.revision()}, {"rows", t.rows.size()}, {"columns", t.columns}});
            };
        });

        static std::vector<std::string> columns;
        static std::string into;
        auto* avg = data->add_subcommand("average", "per-row mean of assay replicate columns");
        avg->add_option("--columns", columns, "columns to average")->required()->delimiter(',');
        avg->add_option("--into", into, "result column")->required();
        avg->callback([&] {
            action = [&] {
                auto a = archive();
                auto t = workflow::average_columns(a, columns, into);
                print(Json{{"revision", a.revision()}, {"rows", t.rows.size()}, {"columns", t.columns}});
            };
        });

        static std::vector<std::string> from, labels;
        static std::string source_column = "Experiment";
        auto* cat = data->add_subcommand("concat", "stack runs of several archives into this one");
        cat->add_option("--from", from, "archive directories")->required();
        cat->add_option("--labels", labels, "one label per archive")->delimiter(',');
        cat->add_option("--source-column", source_column)->capture_default_str();
        cat->callback([&] {
            action = [&] {
                auto a = archive();
                std::vector<Archive> srcs;
                for (const auto& f : from) srcs.emplace_back(f);
                auto t = workflow::concat_archives(a, srcs, source_column, labels);
                print(Json{{"revision", a.revision()}, {"rows", t.rows.size()}, {"columns", t.columns}});
            };
        });

        static std::uint64_t seed = 1;
        static double noise = 1.0;
        auto* simd = data->add_subcommand("simulate", "fill the design with responses from the builtin truth");
        simd->add_option("--seed", seed)->capture_default_str();
        simd->add_option("--noise", noise, "noise SD multiplier")->capture_default_str();
        simd->callback([&] {
            action = [&] {
                auto a = archive();
                auto t = workflow::simulate_data(a, seed, noise);
                a.put_data(t, "simulate");
                print(Json{{"revision", a.revision()}, {"rows", t.rows.size()}, {"columns", t.columns}});
            };
        });

        auto* show = data->add_subcommand("show", "print the data CSV");
        show->callback([&] { action = [&] { std::cout << io::table_to_csv(archive().data()); }; });
    }

    // ------------------------------------------------------------ fit
    {
        static std::vector<std::string> responses;
        static std::string method = "svem-forward", set;
        static FitOptions opt;
        auto* fit = app.add_subcommand("fit", "fit response models");
        fit->add_option("--response", responses, "response to fit (all with data by default)");
        fit->add_option("--method", method, "svem-forward|svem-lasso|forward-aicc|full")->capture_default_str();
        fit->add_option("--samples", opt.samples)->capture_default_str();
        fit->add_option("--seed", opt.seed)->capture_default_str();
        fit->add_option("--set", set, "model set name (default set when empty)");
        fit->add_flag("--force-mixture-mains", opt.force_mixture_mains, "keep every mixture main effect");
        fit->callback([&] {
            action = [&] {
                auto a = archive();
                opt.method = parse_fit_method(method);
                auto models = workflow::fit_models(a, responses, opt, set);
                auto table = a.data();
                Json out = Json::array();
                for (const auto& m : models) {
                    auto ap = actual_by_predicted(m, table);
                    out.push_back(Json{{"response", m.response},
                                       {"path", fs_relative(a, a.model_path(set, m.response))},
                                       {"samples", m.samples},
                                       {"skipped", m.skipped},
                                       {"correlation", ap.correlation ? Json(*ap.correlation) : Json(nullptr)}});
                }
                print(Json{{"revision", a.revision()}, {"set", set}, {"method", method}, {"models", out}});
            };
        });
    }

    // ------------------------------------------------------------ profile
    auto* profile = app.add_subcommand("profile", "prediction profiler")->require_subcommand(1);
    {
        static std::string set;
        static std::vector<std::string> weights, anchors, locks;
        auto common = [](CLI::App* c) {
            c->add_option("--set", set, "model set");
            c->add_option("--weights", weights, "importance override name=w");
            c->add_option("--anchor", anchors, "desirability anchors name=low:high");
        };

        static std::string factor;
        static std::vector<std::string> at;
        static std::size_t grid = 41;
        auto* tr = profile->add_subcommand("trace", "responses and D along one factor");
        common(tr);
        tr->add_option("--factor", factor)->required();
        tr->add_option("--at", at, "other settings factor=value (center by default)");
        tr->add_option("--grid", grid)->capture_default_str();
        tr->callback([&] {
            action = [&] {
                auto a = archive();
                auto def = a.study();
                Json where = Json::object();
                for (const auto& s : at) {
                    auto [k, v] = workflow::split_assignment(s);
                    auto& f = def.factors[def.factor_index(k)];
                    where[k] = f.discrete() ? Json(v) : Json(io::parse_number(v, "setting " + k));
                }
                print(io::to_json(workflow::trace(a, profile_request(set, weights, anchors), factor, where, grid)));
            };
        });

        static std::uint64_t seed = 1;
        static OptimizeOptions oo;
        static bool no_round = false, remember = false;
        static std::string label = "optimum";
        auto* opt = profile->add_subcommand("optimize", "maximize overall desirability");
        common(opt);
        opt->add_option("--lock", locks, "pin a factor factor=value");
        opt->add_option("--seed", seed)->capture_default_str();
        opt->add_option("--starts", oo.starts)->capture_default_str();
        opt->add_option("--refine", oo.refine)->capture_default_str();
        opt->add_flag("--no-round", no_round, "keep the optimum off the granularity grid");
        opt->add_option("--label", label)->capture_default_str();
        opt->add_flag("--remember", remember, "add the optimum to the candidate list");
        opt->callback([&] {
            action = [&] {
                auto a = archive();
                auto def = a.study();
                oo.round = !no_round;
                auto req = profile_request(set, weights, anchors);
                auto c = workflow::optimize(a, req, workflow::parse_locks(def, locks), seed, oo, label);
                if (remember) c = workflow::remember(a, c, label);
                print(Json{{"revision", a.revision()},
                           {"remembered", remember},
                           {"candidate", io::to_json(c, def.factors, Archive::response_names(def))}});
            };
        });

        static std::size_t n = 50000;
        static std::string out;
        auto* rt = profile->add_subcommand("random-table", "uniform feasible draws with D and its cumulative probability");
        common(rt);
        rt->add_option("--n", n)->capture_default_str();
        rt->add_option("--seed", seed)->capture_default_str();
        rt->add_option("--out", out, "also write the CSV here ('-' for stdout)");
        rt->callback([&] {
            action = [&] {
                auto a = archive();
                auto t = random_table(workflow::load_profile(a, profile_request(set, weights, anchors)), n, seed);
                a.put_random_table(t);
                if (out == "-") {
                    std::cout << io::random_table_to_csv(t);
                    return;
                }
                if (!out.empty()) io::write_file(out, io::random_table_to_csv(t));
                auto best = std::max_element(t.desirability.begin(), t.desirability.end()) - t.desirability.begin();
                print(Json{{"revision", a.revision()},
                           {"rows", t.settings.size()},
                           {"path", fs_relative(a, a.path("random_table.csv"))},
                           {"max_desirability", t.desirability[static_cast<std::size_t>(best)]},
                           {"max_cumulative_probability", t.cumulative[static_cast<std::size_t>(best)]}});
            };
        });

        static std::size_t replicates = 1;
        static bool truth = false;
        auto* cand = profile->add_subcommand("candidates", "candidate table CSV: remembered, benchmark, prior best");
        cand->add_option("--set", set, "model set used for benchmark and prior-best predictions");
        cand->add_option("--replicates", replicates, "suggested replicates per candidate")->capture_default_str();
        cand->add_flag("--truth", truth, "append builtin truth columns");
        cand->add_option("--out", out, "CSV path (stdout by default)");
        cand->callback([&] {
            action = [&] {
                auto a = archive();
                workflow::ProfileRequest req;
                req.set = set;
                auto t = workflow::candidate_table(a, req, replicates);
                auto csv = io::candidates_to_csv(t, truth ? workflow::truth_columns(a.study()) : io::TruthColumns{});
                if (out.empty() || out == "-") {
                    std::cout << csv;
                    return;
                }
                io::write_file(out, csv);
                print(Json{{"rows", t.rows.size()}, {"path", out}});
            };
        });
    }

    // ------------------------------------------------------------ sim
    auto* simc = app.add_subcommand("sim", "method comparison with the builtin truth functions")->require_subcommand(1);
    {
        static sim::BenchmarkConfig cfg;
        static std::vector<std::size_t> sizes;
        static std::vector<std::string> methods;
        static std::string out_dir;
        auto* run = simc->add_subcommand("run", "fit, optimize and score every size, method and replicate");
        run->add_option("--sizes", sizes, "design sizes")->delimiter(',');
        run->add_option("--methods", methods, "full,forward-aicc,svem-forward")->delimiter(',');
        run->add_option("--replicates", cfg.replicates)->capture_default_str();
        run->add_option("--samples", cfg.samples, "SVEM samples")->capture_default_str();
        run->add_option("--seed", cfg.seed)->capture_default_str();
        run->add_option("--noise", cfg.noise_scale, "noise SD multiplier")->capture_default_str();
        run->add_option("--starts", cfg.optimize.starts)->capture_default_str();
        run->add_option("--out", out_dir, "directory for results.csv, summary.csv, tests.csv, config.json");
        run->callback([&] {
            action = [&] {
                Json j = io::to_json(cfg);
                if (!sizes.empty()) j["sizes"] = sizes;
                if (!methods.empty()) j["methods"] = methods;
                auto c = io::sim_config_from_json(j);
                auto t0 = std::chrono::steady_clock::now();
                auto results = sim::run_benchmark(sim::builtin_generators(), c);
                double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                auto summary = sim::summarize_benchmark(results);
                if (!out_dir.empty()) {
                    std::filesystem::create_directories(out_dir);
                    io::write_file(out_dir + "/results.csv", io::sim_results_to_csv(results));
                    io::write_file(out_dir + "/summary.csv", io::sim_summary_to_csv(summary));
                    io::write_file(out_dir + "/tests.csv", io::sim_tests_to_csv(summary));
                    io::write_file(out_dir + "/config.json", io::dump(io::to_json(c)));
                }
                print(Json{{"config", io::to_json(c)}, {"seconds", seconds}, {"summary", io::to_json(summary)}});
            };
        });

        static std::string results;
        auto* sum = simc->add_subcommand("summarize", "cell means, intervals and paired tests from results.csv");
        sum->add_option("results", results, "results CSV")->required();
        sum->callback([&] {
            action = [&] {
                print(Json{{"summary", io::to_json(sim::summarize_benchmark(io::sim_results_from_csv(io::read_file(results))))}});
            };
        });
    }

    // ------------------------------------------------------------ serve
    {
        static std::string host = "127.0.0.1";
        static int port = 8080;
        auto* serve = app.add_subcommand("serve", "HTTP/JSON service over the archive");
        serve->add_option("--host", host)->capture_default_str();
        serve->add_option("--port", port)->capture_default_str();
        serve->callback([&] {
            action = [&] {
                Service svc(archive());
                std::cerr << "serving " << archive_dir << " on http://" << host << ":" << port << "\n";
                if (!formix::serve(svc, host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
            };
        });
    }

    auto fail = [](const Failure& f) {
        Json e{{"type", f.type}, {"message", f.message}};
        if (!f.violations.is_null()) e["violations"] = f.violations;
        std::cerr << Json{{"error", e}}.dump() << "\n";
        return f.code;
    };

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail({2, "usage", e.what(), nullptr});
    }
    try {
        if (action) action();
        return 0;
    } catch (const Failure& f) {
        return fail(f);
    } catch (const ValidationError& e) {
        return fail({2, "validation", e.what(), nullptr});
    } catch (const DomainError& e) {
        return fail({2, "domain", e.what(), nullptr});
    } catch (const NotFound& e) {
        return fail({3, "not_found", e.what(), nullptr});
    } catch (const std::exception& e) {
        return fail({1, "internal", e.what(), nullptr});
    }
}
