#pragma once

// JSON service over one archive. `Service::handle` is transport independent;
// `serve` binds it to an HTTP listener. Every response carries the archive
// revision (body field and X-Archive-Revision header). Writes may name the
// revision they expect (query `revision` or If-Match) and get 409 when it is
// stale.

#include "formix/workflow.hpp"

#include <httplib.h>

#include <mutex>

namespace formix {

struct HttpRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
    std::string content_type;
    std::optional<std::string> if_match;
};

struct HttpResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
    std::uint64_t revision = 0;
};

class StaleRevision : public Error {
public:
    using Error::Error;
};

class Service {
public:
    explicit Service(Archive archive) : archive_(std::move(archive)) {}

    HttpResponse handle(const HttpRequest& req) {
        try {
            return route(req);
        } catch (const StaleRevision& e) {
            return error(409, "conflict", e.what());
        } catch (const NotFound& e) {
            return error(404, "not_found", e.what());
        } catch (const ValidationError& e) {
            return error(400, "validation", e.what());
        } catch (const DomainError& e) {
            return error(400, "domain", e.what());
        } catch (const io::Json::exception& e) {
            return error(400, "validation", std::string("malformed request JSON: ") + e.what());
        } catch (const Error& e) {
            return error(500, "internal", e.what());
        }
    }

    const Archive& archive() const { return archive_; }

private:
    Archive archive_;
    std::mutex write_mu_;

    using Json = io::Json;

    HttpResponse json(Json payload, int status = 200) {
        auto rev = archive_.revision();
        Json out{{"revision", rev}};
        for (auto it = payload.begin(); it != payload.end(); ++it) out[it.key()] = it.value();
        return {status, out.dump(), "application/json", rev};
    }

    HttpResponse text(std::string body, std::string type) {
        return {200, std::move(body), std::move(type), archive_.revision()};
    }

    HttpResponse error(int status, const std::string& type, const std::string& message, Json violations = nullptr) {
        Json e{{"type", type}, {"message", message}};
        if (!violations.is_null()) e["violations"] = violations;
        return json(Json{{"error", e}}, status);
    }

    void check_revision(const HttpRequest& req) {
        std::optional<std::string> want;
        if (auto it = req.query.find("revision"); it != req.query.end()) want = it->second;
        else if (req.if_match) want = *req.if_match;
        if (!want) return;
        std::string w = *want;
        w.erase(std::remove(w.begin(), w.end(), '"'), w.end());
        if (w != std::to_string(archive_.revision()))
            throw StaleRevision("stale revision " + w + "; the archive is at revision " + std::to_string(archive_.revision()));
    }

    static Json body_json(const HttpRequest& req) {
        if (req.body.empty()) return Json::object();
        auto j = io::parse_json(req.body, "request");
        if (!j.is_object()) throw ValidationError("request body must be a JSON object");
        return j;
    }

    static std::string query(const HttpRequest& req, const std::string& key, const std::string& fallback = "") {
        auto it = req.query.find(key);
        return it == req.query.end() ? fallback : it->second;
    }

    static workflow::ProfileRequest profile_request(const Json& b) {
        workflow::ProfileRequest pr;
        pr.set = b.value("set", std::string());
        if (b.contains("weights"))
            for (auto it = b["weights"].begin(); it != b["weights"].end(); ++it) pr.weights[it.key()] = it.value().get<double>();
        if (b.contains("anchors"))
            for (auto it = b["anchors"].begin(); it != b["anchors"].end(); ++it)
                pr.anchors[it.key()] = {it.value().at(0).get<double>(), it.value().at(1).get<double>()};
        return pr;
    }

    Json table_json(const DataTable& t) {
        Json rows = Json::array();
        for (const auto& r : t.rows) {
            Json values = Json::object();
            for (std::size_t c = 0; c < t.columns.size(); ++c)
                values[t.columns[c]] = r.values[c] ? Json(*r.values[c]) : Json(nullptr);
            Json row{{"run_id", r.run_id}, {"settings", io::settings_json(t.factors, r.factors)}, {"values", values},
                     {"notes", r.notes},   {"exclude", r.exclude}};
            if (!t.source_column.empty()) row["source"] = r.source;
            rows.push_back(row);
        }
        return Json{{"columns", t.columns}, {"rows", rows}};
    }

    HttpResponse route(const HttpRequest& req) {
        const auto& m = req.method;
        const auto& p = req.path;
        if (p == "/study" && m == "GET") return json(Json{{"study", io::to_json(archive_.study())}});
        if (p == "/study" && m == "PUT") return put_study(req);
        if (p == "/design" && m == "POST") return post_design(req);
        if (p == "/design" && m == "GET")
            return json(Json{{"report", archive_.design_report()}, {"table", table_json(archive_.design())}});
        if (p == "/data" && m == "PUT") return put_data(req);
        if (p == "/data" && m == "GET") return json(Json{{"table", table_json(archive_.data())}});
        if (p == "/fit" && m == "POST") return post_fit(req);
        if (p == "/models" && m == "GET") return get_models(req);
        if (p == "/profiler/trace" && m == "POST") return post_trace(req);
        if (p == "/profiler/optimize" && m == "POST") return post_optimize(req);
        if (p == "/random-table" && m == "POST") return post_random_table(req);
        if (p == "/candidates" && m == "GET") return get_candidates(req);
        if (p == "/ternary" && m == "GET") return get_ternary(req);
        static const std::vector<std::string> known{"/study",          "/design",            "/data",
                                                    "/fit",            "/models",            "/profiler/trace",
                                                    "/profiler/optimize", "/random-table",   "/candidates",
                                                    "/ternary"};
        if (std::find(known.begin(), known.end(), p) != known.end())
            return error(405, "method_not_allowed", m + " is not supported on " + p);
        throw NotFound("no endpoint " + m + " " + p);
    }

    HttpResponse put_study(const HttpRequest& req) {
        std::lock_guard lock(write_mu_);
        check_revision(req);
        auto def = io::study_from_json(io::parse_json(req.body, "study"));
        auto report = validate_study(def);
        if (!report.empty()) return error(400, "validation", "invalid study", io::to_json(report));
        archive_.put_study(def);
        return json(Json{{"study", io::to_json(def)}});
    }

    HttpResponse post_design(const HttpRequest& req) {
        std::lock_guard lock(write_mu_);
        check_revision(req);
        auto b = body_json(req);
        auto def = archive_.study();
        workflow::DesignRequest dr;
        dr.n = b.value("n", std::size_t{0});
        dr.seed = b.value("seed", dr.seed);
        dr.oversample = b.value("oversample", dr.oversample);
        dr.randomize = b.value("randomize", true);
        for (const auto& r : b.value("benchmarks", Json::array()))
            dr.benchmarks.push_back({r.value("label", std::string("benchmark")),
                                     io::settings_from_json(def.factors, r.at("settings"), Settings(def.factors.size(), kNaN)),
                                     r.value("copies", std::size_t{1})});
        auto d = workflow::make_design(archive_, dr);
        return json(Json{{"report", io::design_report(d)}, {"table", table_json(d.table)}});
    }

    HttpResponse put_data(const HttpRequest& req) {
        std::lock_guard lock(write_mu_);
        check_revision(req);
        auto def = archive_.study();
        std::string csv = req.body;
        std::string source;
        if (req.content_type.find("json") != std::string::npos) {
            auto b = body_json(req);
            csv = b.at("csv").get<std::string>();
            source = b.value("source_column", std::string());
        }
        auto t = io::canonical(io::import_csv(csv, def, source));
        archive_.put_data(t);
        return json(Json{{"rows", t.rows.size()}, {"columns", t.columns}});
    }

    HttpResponse post_fit(const HttpRequest& req) {
        std::lock_guard lock(write_mu_);
        check_revision(req);
        auto b = body_json(req);
        FitOptions opt;
        opt.method = parse_fit_method(b.value("method", std::string("svem-forward")));
        opt.samples = b.value("samples", std::size_t{200});
        opt.seed = b.value("seed", std::uint64_t{1});
        opt.force_mixture_mains = b.value("force_mixture_mains", false);
        auto responses = b.value("responses", std::vector<std::string>{});
        auto set = b.value("set", std::string());
        auto models = workflow::fit_models(archive_, responses, opt, set);
        Json out = Json::array();
        auto data = archive_.data();
        for (const auto& mdl : models) out.push_back(model_summary(mdl, set, &data));
        return json(Json{{"models", out}});
    }

    Json model_summary(const EnsembleModel& mdl, const std::string& set, const DataTable* data) {
        std::size_t active = 0;
        for (Eigen::Index i = 0; i < mdl.mean_coefficients().size(); ++i) active += mdl.mean_coefficients()(i) != 0.0;
        Json j{{"set", set},          {"response", mdl.response}, {"method", to_string(mdl.method)},
               {"samples", mdl.samples}, {"skipped", mdl.skipped}, {"rows", mdl.rows},
               {"active_effects", active}};
        if (data) j["actual_by_predicted"] = io::to_json(actual_by_predicted(mdl, *data));
        return j;
    }

    HttpResponse get_models(const HttpRequest& req) {
        auto set = query(req, "set");
        auto response = query(req, "response");
        if (!response.empty()) {
            auto mdl = archive_.model(set, response);
            auto data = archive_.data();
            return json(Json{{"model", io::to_json(mdl)}, {"summary", model_summary(mdl, set, &data)}});
        }
        Json sets = Json::array();
        auto def = archive_.study();
        for (const auto& s : archive_.model_sets()) {
            Json models = Json::array();
            for (const auto& r : def.responses)
                if (archive_.has_model(s, r.name)) models.push_back(model_summary(archive_.model(s, r.name), s, nullptr));
            sets.push_back(Json{{"set", s}, {"models", models}});
        }
        return json(Json{{"sets", sets}});
    }

    HttpResponse post_trace(const HttpRequest& req) {
        auto b = body_json(req);
        auto t = workflow::trace(archive_, profile_request(b), b.at("factor").get<std::string>(),
                                 b.value("at", Json::object()), b.value("grid", std::size_t{41}));
        return json(Json{{"trace", io::to_json(t)}});
    }

    static OptimizeOptions optimize_options(const Json& b) {
        OptimizeOptions o;
        o.starts = b.value("starts", o.starts);
        o.refine = b.value("refine", o.refine);
        o.round = b.value("round", o.round);
        return o;
    }

    HttpResponse post_optimize(const HttpRequest& req) {
        auto b = body_json(req);
        auto def = archive_.study();
        std::map<std::string, std::string> named;
        if (b.contains("locks"))
            for (auto it = b["locks"].begin(); it != b["locks"].end(); ++it)
                named[it.key()] = it.value().is_string() ? it.value().get<std::string>() : io::format_number(it.value().get<double>());
        auto locks = workflow::parse_locks(def, named);
        auto label = b.value("label", std::string("optimum"));
        auto c = workflow::optimize(archive_, profile_request(b), locks, b.value("seed", std::uint64_t{1}),
                                    optimize_options(b), label);
        bool remembered = false;
        if (b.value("remember", false)) {
            std::lock_guard lock(write_mu_);
            check_revision(req);
            c = workflow::remember(archive_, c, label);
            remembered = true;
        }
        return json(Json{{"candidate", io::to_json(c, def.factors, Archive::response_names(def))}, {"remembered", remembered}});
    }

    HttpResponse post_random_table(const HttpRequest& req) {
        auto b = body_json(req);
        auto n = static_cast<std::size_t>(io::parse_number(query(req, "n", "50000"), "n"));
        auto seed = static_cast<std::uint64_t>(io::parse_number(query(req, "seed", "1"), "seed"));
        if (n == 0) throw ValidationError("n must be at least 1");
        auto p = workflow::load_profile(archive_, profile_request(b));
        auto t = random_table(p, n, seed);
        {
            std::lock_guard lock(write_mu_);
            check_revision(req);
            archive_.put_random_table(t);
        }
        return text(io::random_table_to_csv(t), "text/csv");
    }

    HttpResponse get_candidates(const HttpRequest& req) {
        workflow::ProfileRequest pr;
        pr.set = query(req, "set");
        auto replicates = static_cast<std::size_t>(io::parse_number(query(req, "replicates", "1"), "replicates"));
        auto t = workflow::candidate_table(archive_, pr, replicates);
        if (query(req, "format") == "csv") return text(io::candidates_to_csv(t), "text/csv");
        Json rows = Json::array();
        for (const auto& c : t.rows) rows.push_back(io::to_json(c, t.factors, t.responses));
        return json(Json{{"candidates", rows}});
    }

    HttpResponse get_ternary(const HttpRequest& req) {
        auto which = query(req, "table", archive_.has_data() ? "data" : "design");
        auto t = which == "data" ? archive_.data() : archive_.design();
        std::optional<std::pair<std::string, std::string>> pair;
        if (auto p = query(req, "pair"); !p.empty()) {
            auto comma = p.find(',');
            if (comma == std::string::npos) throw ValidationError("pair must be 'A,B'");
            pair = std::make_pair(p.substr(0, comma), p.substr(comma + 1));
        }
        Json panels = Json::array();
        for (const auto& panel : ternary_coordinates(t, pair)) {
            Json pts = Json::array();
            for (const auto& pt : panel.points) pts.push_back(Json::array({pt[0], pt[1], pt[2]}));
            panels.push_back(Json{{"a", panel.a}, {"b", panel.b}, {"points", pts}});
        }
        return json(Json{{"panels", panels}});
    }
};

/// Routes every request on `server` to `svc`.
inline void mount(httplib::Server& server, Service& svc) {
    auto adapt = [&svc](const httplib::Request& r, httplib::Response& res) {
        HttpRequest req{r.method, r.path, {}, r.body, r.get_header_value("Content-Type"), std::nullopt};
        for (const auto& [k, v] : r.params) req.query[k] = v;
        if (r.has_header("If-Match")) req.if_match = r.get_header_value("If-Match");
        auto out = svc.handle(req);
        res.status = out.status;
        res.set_header("X-Archive-Revision", std::to_string(out.revision));
        res.set_content(out.body, out.content_type);
    };
    server.Get(".*", adapt);
    server.Put(".*", adapt);
    server.Post(".*", adapt);
    server.Delete(".*", adapt);
}

/// Serves `svc` until the listener stops.
inline bool serve(Service& svc, const std::string& host, int port) {
    httplib::Server server;
    mount(server, svc);
    return server.listen(host, port);
}

} // namespace formix
