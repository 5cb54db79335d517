#include "nht/nhtcert.h"

#include "nht/run.hpp"

struct nht_session {
    nht::RunRequest req;
    nht::RunResult last;
};

namespace {

int finish(nht_session* s, nht::RunResult r) {
    s->last = std::move(r);
    return s->last.exit_code;
}

int run_with(nht_session* s, nht::RunRequest req) {
    try {
        return finish(s, nht::run(req));
    } catch (const std::exception& e) {
        nht::RunResult r;
        r.error = e.what();
        return finish(s, std::move(r));
    } catch (...) {
        nht::RunResult r;
        r.error = "unknown failure";
        return finish(s, std::move(r));
    }
}

}  // namespace

extern "C" {

nht_session* nht_session_create(void) {
    try {
        return new nht_session{};
    } catch (...) {
        return nullptr;
    }
}

void nht_session_destroy(nht_session* s) { delete s; }

int nht_session_set_seed(nht_session* s, uint64_t seed) {
    if (!s) return NHT_ERROR;
    s->req.seed = seed;
    return NHT_OK;
}

int nht_session_set_task(nht_session* s, const char* task) {
    if (!s) return NHT_ERROR;
    if (task) s->req.task = task;
    else s->req.task.reset();
    return NHT_OK;
}

int nht_session_set_out_dir(nht_session* s, const char* dir) {
    if (!s) return NHT_ERROR;
    if (dir) s->req.out_dir = dir;
    else s->req.out_dir.reset();
    return NHT_OK;
}

int nht_session_set_quiet(nht_session* s, int quiet) {
    if (!s) return NHT_ERROR;
    s->req.quiet = quiet != 0;
    return NHT_OK;
}

int nht_run_config_file(nht_session* s, const char* path) {
    if (!s || !path) return NHT_ERROR;
    nht::RunRequest req = s->req;
    req.config_path = path;
    return run_with(s, std::move(req));
}

int nht_run_config_json(nht_session* s, const char* json_text) {
    if (!s || !json_text) return NHT_ERROR;
    nht::RunRequest req = s->req;
    req.config_text = json_text;
    return run_with(s, std::move(req));
}

const char* nht_last_error(const nht_session* s) { return s ? s->last.error.c_str() : ""; }
const char* nht_last_verdict(const nht_session* s) { return s ? s->last.verdict.c_str() : ""; }
const char* nht_last_report(const nht_session* s) { return s ? s->last.report.c_str() : ""; }

size_t nht_log_count(const nht_session* s) { return s ? s->last.log.size() : 0; }
const char* nht_log_line(const nht_session* s, size_t i) {
    return s && i < s->last.log.size() ? s->last.log[i].c_str() : "";
}

size_t nht_written_count(const nht_session* s) { return s ? s->last.written.size() : 0; }
const char* nht_written_path(const nht_session* s, size_t i) {
    return s && i < s->last.written.size() ? s->last.written[i].c_str() : "";
}

const char* nht_version(void) { return nht::version_string(); }

int nht_kerr_saddle_bound(double M, double a, double Lambda, double l, double p1, double theta,
                          double* out_worst) {
    if (!out_worst) return NHT_ERROR;
    try {
        *out_worst = nht::kerr_saddle_condition({M, a, Lambda}, l, p1, theta).worst;
        return NHT_OK;
    } catch (...) {
        return NHT_ERROR;
    }
}

int nht_decay_threshold(double nu_u, double nu_s, double f, double p1, double mu, double out[3]) {
    if (!out) return NHT_ERROR;
    try {
        auto d = nht::decay_threshold(nht::ThresholdInput::constant(nu_u, nu_s, 0, f, p1, 2, mu));
        out[0] = d.theorem_form;
        out[1] = d.remark_form;
        out[2] = d.kerr_text_form;
        return NHT_OK;
    } catch (...) {
        return NHT_ERROR;
    }
}

}  // extern "C"
