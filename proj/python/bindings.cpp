#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "robmeta/cli.hpp"
#include "robmeta/error.hpp"
#include "robmeta/io.hpp"
#include "robmeta/quality_sets.hpp"
#include "robmeta/robust_analysis.hpp"
#include "robmeta/sampler.hpp"

namespace py = pybind11;
using namespace robmeta;

namespace {

py::object to_python(const Json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

Json from_python(const py::object& o) {
    return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::array_t<double> matrix(const std::vector<double>& v, std::vector<py::ssize_t> shape) {
    py::array_t<double> out(shape);
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

QualityVector as_quality(const std::vector<double>& q) { return QualityVector{q}; }

RunConfig config_from(const py::object& config) {
    if (py::isinstance<py::str>(config) || py::hasattr(config, "__fspath__")) {
        return load_run_config(py::str(config).cast<std::string>());
    }
    return parse_run_config(from_python(config), std::filesystem::current_path());
}

}  // namespace

PYBIND11_MODULE(robmeta, m) {
    m.doc() = "Robust Bayesian bias-adjusted random-effects meta-analysis";
    m.attr("__version__") = ROBMETA_VERSION;

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    py::class_<StudyRecord>(m, "StudyRecord")
        .def(py::init<std::string, long, long, long, long>(), py::arg("name"),
             py::arg("n_control"), py::arg("r_control"), py::arg("n_treatment"), py::arg("r_treatment"))
        .def_readonly("name", &StudyRecord::name)
        .def_readonly("n_control", &StudyRecord::n_control)
        .def_readonly("r_control", &StudyRecord::r_control)
        .def_readonly("n_treatment", &StudyRecord::n_treatment)
        .def_readonly("r_treatment", &StudyRecord::r_treatment)
        .def("__repr__", [](const StudyRecord& s) {
            std::ostringstream os;
            os << "StudyRecord('" << s.name << "', " << s.n_control << ", " << s.r_control << ", "
               << s.n_treatment << ", " << s.r_treatment << ")";
            return os.str();
        });

    py::class_<StudyData>(m, "StudyData")
        .def(py::init([](std::vector<StudyRecord> studies) {
                 StudyData d{std::move(studies)};
                 validate(d);
                 return d;
             }),
             py::arg("studies"))
        .def_readonly("studies", &StudyData::studies)
        .def("__len__", &StudyData::size)
        .def("to_csv", [](const StudyData& d) { return emit_study_data(d); });

    m.def("load_study_data", &ingest_study_data, py::arg("path"), "Reads the study CSV.");
    m.def("parse_study_data", &parse_study_data, py::arg("text"));

    py::class_<Hyperparameters>(m, "Hyperparameters")
        .def(py::init<>())
        .def_readwrite("mu_beta", &Hyperparameters::mu_beta)
        .def_readwrite("sigma_beta", &Hyperparameters::sigma_beta)
        .def_readwrite("mu_mu", &Hyperparameters::mu_mu)
        .def_readwrite("sigma_mu", &Hyperparameters::sigma_mu)
        .def_readwrite("alpha", &Hyperparameters::alpha)
        .def_readwrite("lambda_", &Hyperparameters::lambda);

    py::class_<McmcSettings>(m, "McmcSettings")
        .def(py::init([](std::size_t chains, std::size_t burnin, std::size_t samples, std::size_t thin,
                         std::uint64_t seed) {
                 McmcSettings s;
                 s.n_chains = chains;
                 s.n_burnin = burnin;
                 s.n_samples = samples;
                 s.thin = thin;
                 s.seed = seed;
                 return s;
             }),
             py::arg("chains") = 4, py::arg("burnin") = 5000, py::arg("samples") = 20000, py::arg("thin") = 1,
             py::arg("seed") = McmcSettings{}.seed)
        .def_readwrite("chains", &McmcSettings::n_chains)
        .def_readwrite("burnin", &McmcSettings::n_burnin)
        .def_readwrite("samples", &McmcSettings::n_samples)
        .def_readwrite("thin", &McmcSettings::thin)
        .def_readwrite("seed", &McmcSettings::seed)
        .def_readwrite("adapt_window", &McmcSettings::adapt_window)
        .def_readwrite("target_accept", &McmcSettings::target_accept);

    m.def("logit", &logit, py::arg("p"));
    m.def("inv_logit", &inv_logit, py::arg("x"));
    m.def("study_log_likelihood", &study_log_likelihood, py::arg("study"), py::arg("beta"), py::arg("delta"));

    m.def(
        "run_chain",
        [](const StudyData& data, const std::vector<double>& q, const McmcSettings& settings,
           const Hyperparameters& hyper) {
            PosteriorSamples s;
            {
                py::gil_scoped_release release;
                s = run_chain(data, hyper, as_quality(q), settings);
            }
            const auto c = static_cast<py::ssize_t>(s.n_chains);
            const auto n = static_cast<py::ssize_t>(s.n_samples);
            const auto k = static_cast<py::ssize_t>(s.n_studies);
            py::dict out;
            out["mu"] = matrix(s.mu, {c, n});
            out["sigma2_theta"] = matrix(s.sigma2_theta, {c, n});
            out["beta"] = matrix(s.beta, {c, n, k});
            out["delta"] = matrix(s.delta, {c, n, k});
            out["accept_beta"] = s.accept_beta;
            out["accept_delta"] = s.accept_delta;
            const auto d = diagnostics(s);
            out["rhat_mu"] = d.rhat_mu ? py::cast(*d.rhat_mu) : py::none();
            out["ess_mu"] = d.ess_mu ? py::cast(*d.ess_mu) : py::none();
            return out;
        },
        py::arg("data"), py::arg("q"), py::arg("settings") = McmcSettings{}, py::arg("hyper") = Hyperparameters{},
        "Samples the bias-adjusted posterior at quality vector q. Arrays are indexed [chain, sample(, study)].");

    m.def(
        "unadjusted",
        [](const StudyData& data, const McmcSettings& settings, const std::vector<double>& thresholds,
           const std::vector<double>& levels, const Hyperparameters& hyper) {
            PosteriorSummary s;
            {
                py::gil_scoped_release release;
                s = analyze_unadjusted(data, hyper, settings, thresholds, levels);
            }
            return to_python(to_json(s));
        },
        py::arg("data"), py::arg("settings") = McmcSettings{}, py::arg("thresholds") = std::vector<double>{1.0},
        py::arg("levels") = std::vector<double>{0.05, 0.025, 0.975}, py::arg("hyper") = Hyperparameters{},
        "Posterior summary of the model without bias adjustment.");

    m.def(
        "quality_vectors",
        [](const py::object& config) {
            const auto c = config_from(config);
            const auto data = ingest_study_data(c.data_path);
            std::vector<std::vector<double>> out;
            for (const auto& v : enumerate_from_config(c, data)) out.push_back(v.q);
            return out;
        },
        py::arg("config"), "Enumerated quality vectors for a run configuration (dict or path).");

    m.def(
        "analyze",
        [](const py::object& config) {
            const auto c = config_from(config);
            AnalysisRecord r;
            {
                py::gil_scoped_release release;
                r = run_analysis(c);
            }
            return to_python(to_json(r));
        },
        py::arg("config"),
        "Runs the robust analysis for a run configuration (dict or path) and returns the results document.");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the command line tool in-process; returns (exit code, stdout, stderr).");
}
