// Python bindings for the sensing, reconstruction, feature and data modules.

#include <optional>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cslnet/data.hpp"
#include "cslnet/errors.hpp"
#include "cslnet/eval.hpp"
#include "cslnet/features.hpp"
#include "cslnet/reconstruct.hpp"
#include "cslnet/rng.hpp"
#include "cslnet/sensing.hpp"
#include "cslnet/version.hpp"

namespace py = pybind11;
using namespace cslnet;

PYBIND11_MODULE(_cslnet, m) {
    m.doc() = "Compressed-domain image classification toolkit";
    m.attr("__version__") = kVersion;

    // Translators run newest first, so the base class is registered first.
    const auto error = py::register_exception<Error>(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", error);
    py::register_exception<DataError>(m, "DataError", error);
    py::register_exception<IoError>(m, "IoError", error);
    py::register_exception<DivergenceError>(m, "DivergenceError", error);

    py::class_<Xoshiro256ss>(m, "Xoshiro256ss")
        .def(py::init<std::uint64_t>(), py::arg("seed"))
        .def("next", &Xoshiro256ss::next)
        .def("uniform", [](Xoshiro256ss& r) { return r.uniform(); })
        .def("normal", [](Xoshiro256ss& r) { return r.normal(); });

    py::enum_<sensing::Kind>(m, "Kind")
        .value("Gaussian", sensing::Kind::Gaussian)
        .value("Circulant", sensing::Kind::Circulant)
        .value("Toeplitz", sensing::Kind::Toeplitz);

    py::class_<sensing::SensingMatrix>(m, "SensingMatrix")
        .def_static(
            "build",
            [](sensing::Kind kind, std::size_t rows, std::size_t cols, std::uint64_t seed) {
                return sensing::SensingMatrix::build({kind, rows, cols, seed});
            },
            py::arg("kind"), py::arg("rows"), py::arg("cols"), py::arg("seed") = 0)
        .def_property_readonly("kind", &sensing::SensingMatrix::kind)
        .def_property_readonly("rows", &sensing::SensingMatrix::rows)
        .def_property_readonly("cols", &sensing::SensingMatrix::cols)
        .def_property_readonly("seed", [](const sensing::SensingMatrix& s) { return s.spec().seed; })
        .def_property_readonly("scale", &sensing::SensingMatrix::scale)
        .def_property_readonly("generator", &sensing::SensingMatrix::generator)
        .def("dense", &sensing::SensingMatrix::dense)
        .def("__repr__", [](const sensing::SensingMatrix& s) {
            return "<SensingMatrix " + std::string(sensing::kind_name(s.kind())) + " " + std::to_string(s.rows()) +
                   "x" + std::to_string(s.cols()) + " seed=" + std::to_string(s.spec().seed) + ">";
        });

    m.def("apply", [](const sensing::SensingMatrix& s, const Eigen::VectorXd& x) { return sensing::apply(s, x); });
    m.def("apply_structured",
          [](const sensing::SensingMatrix& s, const Eigen::VectorXd& x) { return sensing::apply_structured(s, x); });
    m.def("compress_image", [](const sensing::SensingMatrix& row, const sensing::SensingMatrix& col,
                               const Eigen::MatrixXd& image) { return sensing::compress_image(row, col, image); });
    m.def("mutual_coherence", &sensing::mutual_coherence);
    m.def("save_matrix", &sensing::save_matrix);
    m.def("load_matrix", &sensing::load_matrix);

    py::class_<reconstruct::RecoveryResult>(m, "RecoveryResult")
        .def_readonly("estimate", &reconstruct::RecoveryResult::estimate)
        .def_readonly("residual_norm", &reconstruct::RecoveryResult::residual_norm)
        .def_readonly("iterations", &reconstruct::RecoveryResult::iterations)
        .def_readonly("converged", &reconstruct::RecoveryResult::converged)
        .def_readonly("support", &reconstruct::RecoveryResult::support)
        .def_readonly("objective", &reconstruct::RecoveryResult::objective);

    m.def("omp", &reconstruct::omp, py::arg("y"), py::arg("matrix"), py::arg("s"));
    m.def("brute_force_l0", &reconstruct::brute_force_l0, py::arg("y"), py::arg("matrix"), py::arg("s"));
    m.def(
        "ista_l1",
        [](const Eigen::VectorXd& y, const sensing::SensingMatrix& s, std::optional<double> lambda,
           std::size_t max_iters, double tol) {
            reconstruct::IstaOptions o;
            o.max_iters = max_iters;
            o.tol = tol;
            return reconstruct::ista_l1(y, s, lambda ? *lambda : reconstruct::default_lambda(y, s), o);
        },
        py::arg("y"), py::arg("matrix"), py::arg("lam") = py::none(), py::arg("max_iters") = 5000,
        py::arg("tol") = 1e-8);
    m.def("lipschitz_constant", &reconstruct::lipschitz_constant, py::arg("matrix"), py::arg("iterations") = 50);

    m.def(
        "extract_channels",
        [](const Eigen::MatrixXd& image, const std::string& combo, std::size_t measurements, std::uint64_t seed) {
            const auto bank = features::MatrixBank::build(measurements, image.rows(), image.cols(), seed);
            const auto t = features::extract_channels(image, features::ChannelCombo::parse(combo), bank);
            return std::vector<Eigen::MatrixXd>(t.channels.begin(), t.channels.end());
        },
        py::arg("image"), py::arg("combo") = "GCT", py::arg("measurements") = 64, py::arg("seed") = 1);
    m.def("enumerate_combos", [](bool dedupe) {
        std::vector<std::string> out;
        for (const auto& c : features::enumerate_combos(dedupe)) out.push_back(c.str());
        return out;
    }, py::arg("dedupe") = true);

    m.def(
        "synthesize_dataset",
        [](std::size_t n_per_class, std::uint64_t seed, const std::string& difficulty) {
            auto d = data::synthesize_dataset(n_per_class, seed, data::parse_difficulty(difficulty));
            std::vector<Eigen::MatrixXd> images;
            images.reserve(d.size());
            for (auto& s : d.samples) images.push_back(std::move(s.image));
            return py::make_tuple(images, d.labels());
        },
        py::arg("n_per_class"), py::arg("seed") = 0, py::arg("difficulty") = "easy");
    m.def("resize_bilinear", &data::resize_bilinear);

    m.def(
        "stratified_kfold",
        [](const std::vector<int>& labels, std::size_t k, std::uint64_t seed) {
            const auto plan = eval::stratified_kfold(labels, k, seed);
            return py::make_tuple(plan.folds, plan.pool);
        },
        py::arg("labels"), py::arg("k") = 5, py::arg("seed") = 0);
}
