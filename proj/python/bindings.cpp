// Python bindings for the core library (module viedl._viedl).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "viedl/data.hpp"
#include "viedl/dirichlet.hpp"
#include "viedl/error.hpp"
#include "viedl/eval.hpp"
#include "viedl/evidential_head.hpp"
#include "viedl/loss.hpp"
#include "viedl/special_fn.hpp"
#include "viedl/theory.hpp"
#include "viedl/train.hpp"

namespace py = pybind11;
using namespace viedl;

namespace {

using Matrix = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Labels = py::array_t<int, py::array::c_style | py::array::forcecast>;

PriorParams make_prior(const std::vector<double>& prior, std::size_t k) {
  return prior.empty() ? PriorParams::uniform(k) : PriorParams(prior);
}

Dataset to_dataset(const Matrix& x, const std::optional<Labels>& y) {
  if (x.ndim() != 2) throw std::invalid_argument("features must be a 2-D array");
  Dataset d;
  d.rows = static_cast<std::size_t>(x.shape(0));
  d.dim = static_cast<std::size_t>(x.shape(1));
  d.features.assign(x.data(), x.data() + x.size());
  if (y) {
    if (y->ndim() != 1 || static_cast<std::size_t>(y->shape(0)) != d.rows) {
      throw std::invalid_argument("labels must be a 1-D array with one entry per row");
    }
    d.labels = std::vector<int>(y->data(), y->data() + y->size());
  }
  d.validate();
  return d;
}

py::tuple from_dataset(const Dataset& d) {
  Matrix x({d.rows, d.dim});
  std::copy(d.features.begin(), d.features.end(), x.mutable_data());
  if (!d.labels) return py::make_tuple(x, py::none());
  Labels y(static_cast<py::ssize_t>(d.rows));
  std::copy(d.labels->begin(), d.labels->end(), y.mutable_data());
  return py::make_tuple(x, y);
}

py::dict report_dict(const EvalReport& r) {
  py::dict out;
  out["id_accuracy"] = r.id_accuracy;
  out["auroc"] = r.auroc;
  out["fpr95"] = r.fpr95;
  out["mean_unc_id"] = r.mean_unc_id;
  out["mean_unc_ood"] = r.mean_unc_ood;
  out["unc_diff"] = r.unc_diff;
  return out;
}

// Trained backbone + head, the unit saved in checkpoints.
class Model {
 public:
  explicit Model(TrainState state) : state_(std::move(state)) {}

  static Model fit(const Matrix& x, const Labels& y, const std::string& config) {
    const Dataset data = to_dataset(x, y);
    const std::size_t classes = data.num_classes();
    TrainConfig cfg;
    if (config.empty()) {
      cfg.loss.prior = PriorParams::uniform(classes);
    } else {
      std::istringstream in(config);
      cfg = parse_train_config(in, classes);
    }
    py::gil_scoped_release release;
    return Model(viedl::fit(data, cfg));
  }

  static Model load(const std::string& path) { return Model(load_checkpoint(path)); }
  static Model from_bytes(const py::bytes& b) { return Model(deserialize_checkpoint(b)); }

  void save(const std::string& path) const { save_checkpoint(state_, path); }
  py::bytes to_bytes() const { return py::bytes(serialize_checkpoint(state_)); }

  py::dict predict(const Matrix& x) const {
    const Dataset data = to_dataset(x, std::nullopt);
    if (data.dim != state_.net.input_dim()) throw std::invalid_argument("feature dimension mismatch");
    const std::size_t k = state_.classes();
    Labels label(static_cast<py::ssize_t>(data.rows));
    py::array_t<double> unc(static_cast<py::ssize_t>(data.rows));
    Matrix p_hat({data.rows, k});
    Matrix evidence({data.rows, k});
    for (std::size_t i = 0; i < data.rows; ++i) {
      const Prediction p = viedl::predict(state_, data.row(i));
      label.mutable_data()[i] = static_cast<int>(p.label);
      unc.mutable_data()[i] = p.uncertainty;
      std::copy(p.p_hat.begin(), p.p_hat.end(), p_hat.mutable_data() + i * k);
      std::copy(p.evidence.begin(), p.evidence.end(), evidence.mutable_data() + i * k);
    }
    py::dict out;
    out["label"] = label;
    out["uncertainty"] = unc;
    out["p_hat"] = p_hat;
    out["evidence"] = evidence;
    return out;
  }

  py::dict evaluate(const Matrix& id_x, const std::optional<Labels>& id_y,
                    const Matrix& ood_x) const {
    return report_dict(viedl::evaluate(state_, to_dataset(id_x, id_y), to_dataset(ood_x, std::nullopt)));
  }

  std::vector<py::dict> noise_sweep(const Matrix& x, const std::vector<double>& sigmas,
                                    std::uint64_t seed, bool relative) const {
    const Dataset data = to_dataset(x, std::nullopt);
    const double scale = relative ? feature_range(data) : 1.0;
    std::vector<py::dict> out;
    for (const NoiseRow& r : viedl::noise_sweep(state_, data, sigmas, seed, scale)) {
      py::dict d;
      d["sigma"] = r.sigma;
      d["sigma_effective"] = r.sigma_effective;
      d["auroc"] = r.auroc;
      d["fpr95"] = r.fpr95;
      d["mean_unc_clean"] = r.mean_unc_clean;
      d["mean_unc_noisy"] = r.mean_unc_noisy;
      out.push_back(std::move(d));
    }
    return out;
  }

  std::vector<py::dict> epoch_log() const {
    std::vector<py::dict> out;
    for (const EpochLog& e : state_.log) {
      py::dict d;
      d["epoch"] = e.epoch;
      d["lambda_t"] = e.lambda_t;
      d["loss"] = e.loss;
      d["bias"] = e.bias;
      d["variance"] = e.variance;
      d["kl"] = e.kl;
      d["mean_evidence"] = e.mean_evidence;
      d["mean_uncertainty"] = e.mean_uncertainty;
      out.push_back(std::move(d));
    }
    return out;
  }

  std::size_t classes() const { return state_.classes(); }
  std::size_t input_dim() const { return state_.net.input_dim(); }
  int epochs() const { return state_.epoch; }
  double evidence_ceiling() const { return state_.head.evidence_ceiling(); }

 private:
  TrainState state_;
};

}  // namespace

PYBIND11_MODULE(_viedl, m) {
  m.doc() = "Dirichlet evidential classification core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("lgamma", &viedl::lgamma, py::arg("x"));
  m.def("digamma", &viedl::digamma, py::arg("x"));
  m.def("trigamma", &viedl::trigamma, py::arg("x"));
  m.def("softplus", &viedl::softplus, py::arg("z"));

  m.def(
      "uncertainty",
      [](const std::vector<double>& alpha, const std::vector<double>& prior) {
        return viedl::uncertainty(DirichletParams(alpha), make_prior(prior, alpha.size()));
      },
      py::arg("alpha"), py::arg("prior") = std::vector<double>{});
  m.def(
      "kl_divergence",
      [](const std::vector<double>& alpha, const std::vector<double>& prior) {
        return viedl::kl_divergence(DirichletParams(alpha), make_prior(prior, alpha.size()));
      },
      py::arg("alpha"), py::arg("prior") = std::vector<double>{},
      "KL(Dir(alpha) || Dir(prior)); prior defaults to all ones.");
  m.def(
      "effective_kl",
      [](const std::vector<double>& alpha, const std::vector<double>& prior) {
        return viedl::effective_kl(DirichletParams(alpha), make_prior(prior, alpha.size()));
      },
      py::arg("alpha"), py::arg("prior") = std::vector<double>{});
  m.def(
      "effective_kl_grad",
      [](const std::vector<double>& alpha, const std::vector<double>& prior) {
        return viedl::effective_kl_grad(DirichletParams(alpha), make_prior(prior, alpha.size()));
      },
      py::arg("alpha"), py::arg("prior") = std::vector<double>{});

  m.def(
      "expected_mse",
      [](const std::vector<double>& alpha, std::size_t label) {
        const ExpectedMse r = viedl::expected_mse(DirichletParams(alpha), LabelVector(alpha.size(), label));
        return py::make_tuple(r.total, r.bias, r.variance);
      },
      py::arg("alpha"), py::arg("label"), "Returns (total, bias, variance).");
  m.def(
      "vi_loss",
      [](const std::vector<double>& alpha, std::size_t label, double beta,
         const std::vector<double>& prior, double anneal) {
        LossConfig cfg;
        cfg.beta = beta;
        cfg.prior = make_prior(prior, alpha.size());
        return viedl::vi_loss(DirichletParams(alpha), LabelVector(alpha.size(), label), cfg, anneal);
      },
      py::arg("alpha"), py::arg("label"), py::arg("beta") = 0.1,
      py::arg("prior") = std::vector<double>{}, py::arg("anneal") = 1.0);
  m.def(
      "vi_loss_grad",
      [](const std::vector<double>& alpha, std::size_t label, double beta,
         const std::vector<double>& prior, double anneal) {
        LossConfig cfg;
        cfg.beta = beta;
        cfg.prior = make_prior(prior, alpha.size());
        return viedl::vi_loss_grad(DirichletParams(alpha), LabelVector(alpha.size(), label), cfg, anneal);
      },
      py::arg("alpha"), py::arg("label"), py::arg("beta") = 0.1,
      py::arg("prior") = std::vector<double>{}, py::arg("anneal") = 1.0);
  m.def(
      "edl_baseline_loss",
      [](const std::vector<double>& alpha, std::size_t label, double anneal) {
        return viedl::edl_baseline_loss(DirichletParams(alpha), LabelVector(alpha.size(), label), anneal);
      },
      py::arg("alpha"), py::arg("label"), py::arg("anneal") = 1.0);

  m.def(
      "head_evidence",
      [](const Matrix& prototypes, double gamma, double margin, const std::vector<double>& feature) {
        if (prototypes.ndim() != 2) throw std::invalid_argument("prototypes must be K x d");
        const auto k = static_cast<std::size_t>(prototypes.shape(0));
        const auto d = static_cast<std::size_t>(prototypes.shape(1));
        const EvidenceHead head(k, d, std::vector<double>(prototypes.data(), prototypes.data() + prototypes.size()),
                                gamma, margin);
        return evidence(head, feature).e;
      },
      py::arg("prototypes"), py::arg("gamma"), py::arg("margin"), py::arg("feature"),
      "Evidence softplus(gamma (cos(x, w_k) - m)) for every prototype row.");

  m.def(
      "auroc",
      [](const std::vector<double>& id, const std::vector<double>& ood) { return viedl::auroc(id, ood); },
      py::arg("id_scores"), py::arg("ood_scores"));
  m.def(
      "fpr_at_95_tpr",
      [](const std::vector<double>& id, const std::vector<double>& ood) {
        return viedl::fpr_at_95_tpr(id, ood);
      },
      py::arg("id_scores"), py::arg("ood_scores"));

  m.def(
      "lipschitz_constant",
      [](std::size_t k, double beta, const std::vector<double>& prior) {
        return viedl::lipschitz_constant(k, beta, make_prior(prior, k));
      },
      py::arg("k"), py::arg("beta"), py::arg("prior") = std::vector<double>{});
  m.def(
      "evidence_capacity",
      [](const std::vector<double>& prior, double mu_min) {
        return viedl::evidence_capacity(PriorParams(prior), mu_min);
      },
      py::arg("prior"), py::arg("mu_min"));
  m.def(
      "certify_gradient_bound",
      [](std::size_t k, double beta, const std::vector<double>& prior, std::size_t trials,
         std::uint64_t seed, double alpha_max) {
        CertificationOptions opts;
        opts.alpha_max = alpha_max;
        const PriorParams p = make_prior(prior, k);
        CertificationResult r;
        {
          py::gil_scoped_release release;
          r = viedl::certify_gradient_bound(k, beta, p, trials, seed, opts);
        }
        py::dict out;
        out["empirical_sup"] = r.empirical_sup;
        out["bound"] = r.bound;
        out["pass"] = r.pass;
        std::vector<py::dict> checks;
        for (const InequalityCheck& c : r.checks) {
          py::dict d;
          d["name"] = c.name;
          d["empirical_sup"] = c.empirical_sup;
          d["bound"] = c.bound;
          d["pass"] = c.pass();
          checks.push_back(std::move(d));
        }
        out["checks"] = checks;
        return out;
      },
      py::arg("k"), py::arg("beta"), py::arg("prior") = std::vector<double>{},
      py::arg("trials") = 100000, py::arg("seed") = 1, py::arg("alpha_max") = 1e3);

  m.def(
      "gaussian_blobs",
      [](std::size_t k, std::size_t n_per_class, std::size_t dim, double sep, double spread,
         std::uint64_t seed) { return from_dataset(viedl::gaussian_blobs(k, n_per_class, dim, sep, spread, seed)); },
      py::arg("k") = 3, py::arg("n_per_class") = 500, py::arg("dim") = 2, py::arg("sep") = 6.0,
      py::arg("spread") = 1.0, py::arg("seed") = 7, "Returns (features, labels).");
  m.def(
      "ood_blob",
      [](std::size_t dim, std::size_t n, double offset, double spread, std::uint64_t seed,
         double angle) { return from_dataset(viedl::ood_blob(dim, n, offset, spread, seed, angle))[0]; },
      py::arg("dim") = 2, py::arg("n") = 500, py::arg("offset") = 20.0, py::arg("spread") = 1.0,
      py::arg("seed") = 11, py::arg("angle") = 0.0);
  m.def(
      "synthetic",
      [](const std::string& spec) { return from_dataset(synthetic_from_spec(spec)); },
      py::arg("spec"), "Parses e.g. 'blobs:k=3,n=500,d=2,sep=6,spread=1,seed=7'.");

  py::class_<Model>(m, "Model")
      .def_static("fit", &Model::fit, py::arg("features"), py::arg("labels"),
                  py::arg("config") = std::string{},
                  "Trains on (features, labels); `config` is key=value text as in config files.")
      .def_static("load", &Model::load, py::arg("path"))
      .def_static("from_bytes", &Model::from_bytes, py::arg("data"))
      .def("save", &Model::save, py::arg("path"))
      .def("to_bytes", &Model::to_bytes)
      .def("predict", &Model::predict, py::arg("features"))
      .def("evaluate", &Model::evaluate, py::arg("id_features"), py::arg("id_labels"),
           py::arg("ood_features"))
      .def("noise_sweep", &Model::noise_sweep, py::arg("features"),
           py::arg("sigmas") = std::vector<double>{0.05, 0.10, 0.20}, py::arg("seed") = 2024,
           py::arg("relative") = true)
      .def_property_readonly("epoch_log", &Model::epoch_log)
      .def_property_readonly("classes", &Model::classes)
      .def_property_readonly("input_dim", &Model::input_dim)
      .def_property_readonly("epochs", &Model::epochs)
      .def_property_readonly("evidence_ceiling", &Model::evidence_ceiling);
}
