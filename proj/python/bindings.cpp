#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <stdexcept>

#include "woundstage/datapipe.hpp"
#include "woundstage/explain.hpp"
#include "woundstage/fiberquant.hpp"
#include "woundstage/model.hpp"
#include "woundstage/stats.hpp"
#include "woundstage/synth.hpp"
#include "woundstage/trainer.hpp"

namespace py = pybind11;
namespace ws = woundstage;

namespace {

ws::ImageU8 image_from_array(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 3 || arr.shape(2) != 3)
        throw ws::DimensionError("expected an HxWx3 uint8 array");
    ws::ImageU8 img;
    img.height = static_cast<int>(arr.shape(0));
    img.width = static_cast<int>(arr.shape(1));
    img.pixels.assign(arr.data(), arr.data() + arr.size());
    return img;
}

py::array_t<std::uint8_t> array_from_image(const ws::ImageU8& img) {
    py::array_t<std::uint8_t> arr({img.height, img.width, 3});
    std::copy(img.pixels.begin(), img.pixels.end(), arr.mutable_data());
    return arr;
}

std::vector<float> chw_from_image_array(const ws::ModelGraph<float>& model, const py::array& image) {
    auto arr = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>::ensure(image);
    if (!arr) throw ws::DimensionError("expected an HxWx3 uint8 array");
    ws::ImageU8 img = image_from_array(arr);
    int input = ws::resolved_input_size(model.config);
    return ws::normalize_chw<float>(ws::resize_bilinear(img, input, input));
}

py::array_t<double> map_to_array(const std::vector<double>& values, int height, int width) {
    py::array_t<double> arr({height, width});
    std::copy(values.begin(), values.end(), arr.mutable_data());
    return arr;
}

py::array_t<float> vec_to_array(const std::vector<float>& values) {
    py::array_t<float> arr(static_cast<py::ssize_t>(values.size()));
    std::copy(values.begin(), values.end(), arr.mutable_data());
    return arr;
}

}  // namespace

PYBIND11_MODULE(_woundstage, m) {
    m.doc() = "wound healing stage analysis: classifier, evidence maps, fiber statistics";

    py::register_exception<ws::UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<ws::DataError>(m, "DataError", PyExc_RuntimeError);
    py::register_exception<ws::NumericError>(m, "NumericError", PyExc_ArithmeticError);

    m.attr("STAGE_NAMES") = [] {
        py::list names;
        for (int c = 0; c < ws::kNumStages; ++c)
            names.append(ws::stage_name(static_cast<ws::StageLabel>(c)));
        return names;
    }();

    py::class_<ws::ModelGraph<float>, std::shared_ptr<ws::ModelGraph<float>>>(m, "Model")
        .def_static(
            "load",
            [](const std::filesystem::path& path) {
                return std::make_shared<ws::ModelGraph<float>>(ws::load_checkpoint(path));
            },
            py::arg("path"))
        .def_static(
            "fresh",
            [](const std::string& preset, int input_size, int num_classes, std::uint64_t seed) {
                ws::ModelConfig cfg;
                cfg.preset = ws::preset_from_name(preset);
                cfg.input_size = input_size;
                cfg.num_classes = num_classes;
                return std::make_shared<ws::ModelGraph<float>>(ws::build_model<float>(cfg, seed));
            },
            py::arg("preset") = "vgg_tiny", py::arg("input_size") = 0, py::arg("num_classes") = 6,
            py::arg("seed") = 1)
        .def_property_readonly("input_size",
                               [](const ws::ModelGraph<float>& g) { return ws::resolved_input_size(g.config); })
        .def_property_readonly("num_classes",
                               [](const ws::ModelGraph<float>& g) { return g.config.num_classes; })
        .def_property_readonly("preset",
                               [](const ws::ModelGraph<float>& g) { return ws::preset_name(g.config.preset); })
        .def_property_readonly("parameter_count",
                               [](const ws::ModelGraph<float>& g) { return g.parameter_count(); })
        .def("save", [](const ws::ModelGraph<float>& g,
                        const std::filesystem::path& path) { ws::save_checkpoint(g, path); },
             py::arg("path"))
        .def(
            "logits",
            [](const ws::ModelGraph<float>& g, const py::array& image) {
                return vec_to_array(g.infer_logits(chw_from_image_array(g, image)));
            },
            py::arg("image"), "raw class scores for an HxWx3 uint8 image")
        .def(
            "predict",
            [](const ws::ModelGraph<float>& g, const py::array& image) {
                std::vector<float> logits = g.infer_logits(chw_from_image_array(g, image));
                std::vector<float> probs = ws::softmax(logits);
                int best = 0;
                for (std::size_t i = 1; i < probs.size(); ++i)
                    if (probs[i] > probs[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
                return py::make_tuple(best, vec_to_array(probs));
            },
            py::arg("image"), "(predicted class, softmax probabilities)")
        .def(
            "layercam",
            [](const ws::ModelGraph<float>& g, const py::array& image, int class_id, int layer_id) {
                ws::ActivationMap map = ws::layercam(g, chw_from_image_array(g, image), class_id, layer_id);
                return py::make_tuple(map.class_id, map.layer_id,
                                      map_to_array(map.values, map.height, map.width));
            },
            py::arg("image"), py::arg("class_id") = -1, py::arg("layer_id") = -1,
            "(class, layer, HxW evidence map)")
        .def(
            "saliency",
            [](const ws::ModelGraph<float>& g, const py::array& image, int class_id) {
                std::vector<float> chw = chw_from_image_array(g, image);
                ws::ActivationMap map = ws::layercam(g, chw, class_id, -1);
                std::vector<double> guided = ws::guided_backprop(g, chw, map.class_id);
                int input = ws::resolved_input_size(g.config);
                ws::SaliencyImage sal = ws::fuse_saliency(map, guided, input, input);
                return py::make_tuple(map.class_id, map_to_array(sal.values, sal.height, sal.width));
            },
            py::arg("image"), py::arg("class_id") = -1,
            "(class, fused input-resolution saliency in [0,1])");

    m.def(
        "resize_bilinear",
        [](const py::array& image, int width, int height) {
            auto arr = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>::ensure(image);
            if (!arr) throw ws::DimensionError("expected an HxWx3 uint8 array");
            return array_from_image(ws::resize_bilinear(image_from_array(arr), width, height));
        },
        py::arg("image"), py::arg("width"), py::arg("height"));

    m.def(
        "augment12",
        [](const py::array& image) {
            auto arr = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>::ensure(image);
            if (!arr) throw ws::DimensionError("expected an HxWx3 uint8 array");
            py::list out;
            for (const auto& v : ws::augment12(image_from_array(arr))) out.append(array_from_image(v));
            return out;
        },
        py::arg("image"), "the twelve rotation/flip variants in fixed order");

    m.def(
        "split_counts",
        [](int n, int rt, int rv, int rs) {
            auto c = ws::split_counts(n, {rt, rv, rs});
            return py::make_tuple(c[0], c[1], c[2]);
        },
        py::arg("n"), py::arg("train"), py::arg("val"), py::arg("test"));

    m.def(
        "collagen_mask",
        [](const py::array& image, double hue_lo, double hue_hi, double sat_min, double val_min) {
            auto arr = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>::ensure(image);
            if (!arr) throw ws::DimensionError("expected an HxWx3 uint8 array");
            ws::ImageU8 img = image_from_array(arr);
            ws::MaskParams p{hue_lo, hue_hi, sat_min, val_min};
            ws::CollagenMask mask = ws::collagen_mask(img, p);
            py::array_t<std::uint8_t> out({img.height, img.width});
            std::copy(mask.mask.begin(), mask.mask.end(), out.mutable_data());
            return py::make_tuple(out, mask.coverage());
        },
        py::arg("image"), py::arg("hue_lo") = 150.0, py::arg("hue_hi") = 270.0,
        py::arg("sat_min") = 0.15, py::arg("val_min") = 0.10, "(0/1 mask, coverage fraction)");

    m.def(
        "coherency",
        [](const py::array& image, double sigma) {
            auto arr = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>::ensure(image);
            if (!arr) throw ws::DimensionError("expected an HxWx3 uint8 array");
            return ws::image_coherency(image_from_array(arr), {}, sigma);
        },
        py::arg("image"), py::arg("sigma") = 2.0,
        "masked orientation coherency of a stained image, in [0,1]");

    m.def(
        "welch_t_test",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            ws::WelchResult r = ws::welch_ttest_full(a, b);
            return py::make_tuple(r.t, r.df, r.p);
        },
        py::arg("a"), py::arg("b"), "(t statistic, degrees of freedom, two-sided p)");

    m.def("student_t_two_sided_p", &ws::student_t_two_sided_p, py::arg("t"), py::arg("df"));

    m.def(
        "pvalue_matrix",
        [](const std::vector<std::string>& names, const std::vector<std::vector<double>>& groups) {
            ws::PValueMatrix mat = ws::pvalue_matrix(names, groups);
            std::size_t n = mat.names.size();
            py::array_t<double> p({n, n});
            auto view = p.mutable_unchecked<2>();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) view(i, j) = mat.p[i][j];
            return py::make_tuple(mat.names, p);
        },
        py::arg("names"), py::arg("groups"));

    m.def(
        "group_stats",
        [](const std::vector<double>& values) {
            ws::GroupStats g = ws::group_stats(values);
            py::dict d;
            d["count"] = g.count;
            d["mean"] = g.mean;
            d["median"] = g.median;
            d["q1"] = g.q1;
            d["q3"] = g.q3;
            d["iqr"] = g.iqr;
            d["whisker_low"] = g.whisker_low;
            d["whisker_high"] = g.whisker_high;
            return d;
        },
        py::arg("values"));

    m.def("roc_auc", &ws::roc_auc, py::arg("scores"), py::arg("labels"),
          "pairwise AUC with tie credit 1/2; labels are 0/1");

    m.def(
        "synthesize_dataset",
        [](const std::filesystem::path& out_dir, const std::string& task, int per_class,
           int image_size, std::uint64_t seed) {
            ws::SynthConfig cfg;
            cfg.task = task == "source" ? ws::SynthTask::source : ws::SynthTask::target;
            cfg.per_class = per_class;
            cfg.image_size = image_size;
            cfg.seed = seed;
            ws::Manifest manifest = ws::synthesize_dataset(cfg, out_dir);
            ws::save_manifest(manifest, out_dir / "manifest.csv");
            return (out_dir / "manifest.csv").string();
        },
        py::arg("out_dir"), py::arg("task") = "target", py::arg("per_class") = 12,
        py::arg("image_size") = 96, py::arg("seed") = 1,
        "writes images plus manifest.csv, returns the manifest path");
}
