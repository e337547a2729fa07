#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ecp/attn_sim.hpp"
#include "ecp/bias.hpp"
#include "ecp/errors.hpp"
#include "ecp/pipeline.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_ecp, m) {
    m.doc() = "Event-guided visual token pruning: keyframe sampling, "
              "motion-saliency filtering, and rank-fusion pruning.";

    py::register_exception<ecp::ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ecp::DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<ecp::InvariantError>(m, "InvariantError", PyExc_RuntimeError);

    py::class_<ecp::Event>(m, "Event")
        .def(py::init([](std::uint16_t x, std::uint16_t y, std::uint64_t t, int p) {
                 return ecp::Event{x, y, t, static_cast<std::int8_t>(p)};
             }),
             py::arg("x"), py::arg("y"), py::arg("t"), py::arg("p"))
        .def_readonly("x", &ecp::Event::x)
        .def_readonly("y", &ecp::Event::y)
        .def_readonly("t", &ecp::Event::t)
        .def_readonly("p", &ecp::Event::p);

    py::class_<ecp::EventStream>(m, "EventStream")
        .def(py::init<>())
        .def_readwrite("events", &ecp::EventStream::events)
        .def_readwrite("sensor_width", &ecp::EventStream::sensor_width)
        .def_readwrite("sensor_height", &ecp::EventStream::sensor_height)
        .def_readwrite("t_start", &ecp::EventStream::t_start)
        .def_readwrite("t_end", &ecp::EventStream::t_end)
        .def("__len__", &ecp::EventStream::size);

    py::enum_<ecp::EventFormat>(m, "EventFormat")
        .value("TEXT_CSV", ecp::EventFormat::TextCsv)
        .value("PACKED_BINARY", ecp::EventFormat::PackedBinary);

    py::class_<ecp::DensityFilterParams>(m, "DensityFilterParams")
        .def(py::init<>())
        .def_readwrite("spatial_radius", &ecp::DensityFilterParams::spatial_radius)
        .def_readwrite("temporal_radius", &ecp::DensityFilterParams::temporal_radius)
        .def_readwrite("min_neighbors", &ecp::DensityFilterParams::min_neighbors);

    py::class_<ecp::WindowingParams>(m, "WindowingParams")
        .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("delta_t"), py::arg("origin") = 0)
        .def_readwrite("delta_t", &ecp::WindowingParams::delta_t)
        .def_readwrite("origin", &ecp::WindowingParams::origin);

    py::class_<ecp::ActivityProfile>(m, "ActivityProfile")
        .def_readonly("flux", &ecp::ActivityProfile::flux)
        .def_readonly("deltas", &ecp::ActivityProfile::deltas);

    m.def("ingest_events_file", &ecp::ingest_events_file, py::arg("path"), py::arg("format"),
          py::arg("width"), py::arg("height"));
    m.def("density_filter", &ecp::density_filter, py::arg("stream"), py::arg("params"));
    m.def("activity_flux", &ecp::activity_flux, py::arg("stream"), py::arg("windowing"),
          py::arg("filter") = ecp::DensityFilterParams{});

    py::class_<ecp::EsimParams>(m, "EsimParams")
        .def(py::init<>())
        .def_readwrite("c_pos", &ecp::EsimParams::c_pos)
        .def_readwrite("c_neg", &ecp::EsimParams::c_neg)
        .def_readwrite("t_ref", &ecp::EsimParams::t_ref)
        .def_readwrite("log_eps", &ecp::EsimParams::log_eps);

    py::class_<ecp::FrameSequence>(m, "FrameSequence")
        .def(py::init<>())
        .def_readwrite("frames", &ecp::FrameSequence::frames)
        .def_readwrite("timestamps", &ecp::FrameSequence::timestamps)
        .def_readwrite("width", &ecp::FrameSequence::width)
        .def_readwrite("height", &ecp::FrameSequence::height);

    m.def("simulate_events", &ecp::simulate_events, py::arg("frames"),
          py::arg("params") = ecp::EsimParams{});
    m.def("load_frame_dir", &ecp::load_frame_dir, py::arg("dir"), py::arg("timestamp_file"));

    py::class_<ecp::EtcsParams>(m, "EtcsParams")
        .def(py::init<>())
        .def_readwrite("n_target", &ecp::EtcsParams::n_target)
        .def_readwrite("delta_share", &ecp::EtcsParams::delta_share)
        .def_readwrite("min_gap", &ecp::EtcsParams::min_gap)
        .def_readwrite("low_activity_quantile", &ecp::EtcsParams::low_activity_quantile);

    py::class_<ecp::KeyframeSet>(m, "KeyframeSet")
        .def_readonly("window_indices", &ecp::KeyframeSet::window_indices)
        .def_readonly("frame_indices", &ecp::KeyframeSet::frame_indices)
        .def_readonly("frame_times", &ecp::KeyframeSet::frame_times);

    m.def("select_keyframes", &ecp::select_keyframes, py::arg("profile"), py::arg("params"),
          py::arg("frame_times"));

    py::class_<ecp::TokenGridSpec>(m, "TokenGridSpec")
        .def(py::init([](std::uint16_t rows, std::uint16_t cols, std::uint16_t w, std::uint16_t h) {
                 return ecp::TokenGridSpec{rows, cols, w, h};
             }),
             py::arg("rows"), py::arg("cols"), py::arg("sensor_width"), py::arg("sensor_height"))
        .def("token_of", &ecp::TokenGridSpec::token_of)
        .def_property_readonly("token_count", &ecp::TokenGridSpec::token_count);

    py::class_<ecp::TimeInterval>(m, "TimeInterval")
        .def(py::init([](std::uint64_t b, std::uint64_t e) { return ecp::TimeInterval{b, e}; }),
             py::arg("begin"), py::arg("end"));

    py::class_<ecp::SaliencyMap>(m, "SaliencyMap")
        .def_readonly("counts", &ecp::SaliencyMap::counts)
        .def_readonly("saliency", &ecp::SaliencyMap::saliency)
        .def_readonly("frame_index", &ecp::SaliencyMap::frame_index);

    py::class_<ecp::RetainedSet>(m, "RetainedSet")
        .def_readonly("indices", &ecp::RetainedSet::indices)
        .def_readonly("budget_k", &ecp::RetainedSet::budget_k)
        .def_readonly("frame_index", &ecp::RetainedSet::frame_index);

    m.def("token_saliency", &ecp::token_saliency, py::arg("stream"), py::arg("grid"),
          py::arg("window"), py::arg("filter") = ecp::DensityFilterParams{},
          py::arg("frame_index") = 0);
    m.def("retain_topk", &ecp::retain_topk, py::arg("map"), py::arg("rho"));

    m.def("rank_project", &ecp::rank_project, py::arg("values"));
    m.def(
        "calibrate",
        [](const std::vector<double>& attention, const std::vector<double>& event, double gamma) {
            return ecp::calibrate(ecp::VisualScore{attention, event}, gamma);
        },
        py::arg("attention"), py::arg("event"), py::arg("gamma"));
    m.def("score_gap", &ecp::score_gap, py::arg("rank_attn_u"), py::arg("rank_event_u"),
          py::arg("rank_attn_j"), py::arg("rank_event_j"), py::arg("gamma"));

    py::class_<ecp::AttentionMap>(m, "AttentionMap")
        .def_readonly("layer", &ecp::AttentionMap::layer)
        .def_readonly("n_tokens", &ecp::AttentionMap::n_tokens)
        .def_readonly("scores", &ecp::AttentionMap::scores)
        .def_property_readonly("n_queries", &ecp::AttentionMap::n_queries);

    m.def("attention_readout", &ecp::attention_readout, py::arg("map"), py::arg("frame"));
    m.def("read_attention_map", &ecp::read_attention_map_file, py::arg("path"));
    m.def("write_attention_map", &ecp::write_attention_map_file, py::arg("path"), py::arg("map"));

    py::class_<ecp::RegionPartition>(m, "RegionPartition")
        .def_readonly("corner", &ecp::RegionPartition::corner)
        .def_readonly("edge", &ecp::RegionPartition::edge)
        .def_readonly("center", &ecp::RegionPartition::center)
        .def_property_readonly("peripheral_count", &ecp::RegionPartition::peripheral_count);

    py::class_<ecp::BiasStatsEntry>(m, "BiasStatsEntry")
        .def_readonly("mu", &ecp::BiasStatsEntry::mu)
        .def_readonly("sigma", &ecp::BiasStatsEntry::sigma)
        .def_readonly("cohens_d", &ecp::BiasStatsEntry::cohens_d)
        .def_readonly("t_stat", &ecp::BiasStatsEntry::t_stat)
        .def_readonly("n", &ecp::BiasStatsEntry::n)
        .def_readonly("degenerate", &ecp::BiasStatsEntry::degenerate);

    m.def("partition_regions", &ecp::partition_regions, py::arg("rows"), py::arg("cols"),
          py::arg("margin_fraction"));
    m.def("peripheral_ratio", &ecp::peripheral_ratio, py::arg("token_mass"), py::arg("partition"));
    m.def("bias_stats", &ecp::bias_stats, py::arg("ratios"), py::arg("mu0") = 1.0);
    m.def("profile_correlation", &ecp::profile_correlation, py::arg("a"), py::arg("b"));

    m.def("synth_biased_map", &ecp::synth_biased_map, py::arg("partition"), py::arg("multiplier"),
          py::arg("noise_scale"), py::arg("layer"), py::arg("frames"), py::arg("n_queries"),
          py::arg("n_text"), py::arg("seed"));

    py::class_<ecp::EfficiencyReport>(m, "EfficiencyReport")
        .def_readonly("total_cost", &ecp::EfficiencyReport::total_cost)
        .def_readonly("baseline_total", &ecp::EfficiencyReport::baseline_total)
        .def_readonly("reduction_ratio", &ecp::EfficiencyReport::reduction_ratio);

    m.def("flops_model", &ecp::flops_model, py::arg("tokens_per_layer"), py::arg("full_tokens"),
          py::arg("d_k"));

    m.def(
        "run_pipeline",
        [](const std::string& config_json) {
            const auto config = ecp::PipelineConfig::from_json_text(config_json);
            ecp::EfficiencyReport report;
            ecp::run_pipeline(config, &report);
            return report;
        },
        py::arg("config_json"), "Run the full cascade from a JSON config string.");
    m.def("default_config", [] { return ecp::PipelineConfig{}.to_json_text(); });
}
