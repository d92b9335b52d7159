#pragma once

// Command-line front end. `run` is the whole program minus `main`, so tests
// can drive it in-process.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ledvlc/config.hpp"
#include "ledvlc/decode.hpp"
#include "ledvlc/eval.hpp"
#include "ledvlc/frame.hpp"

namespace ledvlc::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kCalibration = 3, kIo = 4 };

inline int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::CalibrationFailure:
        case ErrorKind::IllConditionedFit:
        case ErrorKind::AmbiguousCorner:
        case ErrorKind::DegenerateDistortion: return kCalibration;
        case ErrorKind::Io: return kIo;
        default: return kValidation;
    }
}

/// Writes through a sibling temp file and renames it into place, so readers
/// never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            out.close();
            fs::remove(tmp, ec);
            fail(ErrorKind::Io, "short write to " + tmp.string());
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        fail(ErrorKind::Io, "cannot rename into " + path.string());
    }
}

/// Reads an input file; malformed content is reported as an I/O failure.
template <class F>
auto load_input(const std::string& what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Parse) throw Error(ErrorKind::Io, what + ": " + e.what());
        throw;
    }
}

inline std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

struct Common {
    std::string config_path;
    std::string preset = "table2";
    std::uint64_t seed = 1;
    std::string out;
};

inline AppConfig load_app_config(const Common& c) {
    const std::string text = c.config_path.empty() ? std::string() : read_file(c.config_path);
    return load_config(c.preset, text);
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    bool pilot = false;
    std::string pattern_path;
    double ratio = 0.3;
    int frames = 1;
    int max_overlaps = -1;
};

inline int cmd_simulate(const Common& c, const SimulateArgs& a, std::ostream& out) {
    const AppConfig cfg = load_app_config(c);
    const Scene& s = cfg.scene;
    if (a.frames < 1) fail(ErrorKind::Validation, "simulate: --frames must be >= 1");
    if (c.out.empty()) fail(ErrorKind::Validation, "simulate: --out is required");

    std::optional<SymbolMatrix> fixed;
    if (a.pilot) fixed = pilot_pattern(s.geometry.n, s.calibration.pilot_stride);
    else if (!a.pattern_path.empty()) {
        fixed = load_input("pattern", [&] { return symbols_from_text(read_file(a.pattern_path)); });
        if (fixed->n() != s.geometry.n) fail(ErrorKind::SizeMismatch, "simulate: pattern size does not match geometry.n");
    }

    // Render everything before touching the output directory.
    std::vector<std::pair<std::string, std::string>> files;
    const std::string stem = a.pilot ? "pilot" : "frame";
    for (int k = 0; k < a.frames; ++k) {
        const SymbolMatrix pattern =
            fixed ? *fixed
                  : gen_pattern(s.geometry.n, a.ratio, a.max_overlaps, s.spot_c_px, s.truth_grid(), hash_key(c.seed, 2, k));
        const Frame frame = s.render(pattern, hash_key(c.seed, 3, k));
        std::ostringstream name;
        name << stem << '_' << std::setw(3) << std::setfill('0') << k;
        files.emplace_back(name.str() + ".pgm", encode_pgm(frame, cfg.pgm_bits));
        files.emplace_back(name.str() + ".truth.txt", to_text(pattern));
    }
    const std::filesystem::path dir(c.out);
    for (const auto& [name, bytes] : files) write_file_atomic(dir / name, bytes);
    out << "wrote " << files.size() / 2 << " frame(s) to " << dir.string() << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// calibrate

inline int cmd_calibrate(const Common& c, const std::string& frame_path, std::ostream& out) {
    const AppConfig cfg = load_app_config(c);
    if (c.out.empty()) fail(ErrorKind::Validation, "calibrate: --out is required");
    const Frame frame = load_input("frame", [&] { return read_pgm(frame_path); });
    const Scene& s = cfg.scene;
    const auto rep = calibrate_pilot_frame(frame, s.receiver_camera(), s.geometry, s.calibration);
    write_file_atomic(c.out, dump(to_json(rep)));
    out << std::setprecision(10) << "k1 " << rep.k.k1 << "\nk2 " << rep.k.k2 << "\nk3 " << rep.k.k3 << "\nrmse " << rep.rmse
        << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// decode

struct DecodeArgs {
    std::string frame_path;
    std::string calibration_path;
    std::string truth_path;
    std::string decoder = "proposed";
};

inline int cmd_decode(const Common& c, const DecodeArgs& a, std::ostream& out) {
    const AppConfig cfg = load_app_config(c);
    if (c.out.empty()) fail(ErrorKind::Validation, "decode: --out is required");
    const Decoder decoder = parse_decoder(a.decoder);
    const Frame frame = load_input("frame", [&] { return read_pgm(a.frame_path); });
    const CalibrationReport cal = load_input("calibration", [&] {
        const std::string text = read_file(a.calibration_path);
        const auto j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded()) fail(ErrorKind::Parse, "calibration report is not valid JSON");
        return calibration_from_json(j);
    });
    std::optional<SymbolMatrix> truth;
    if (!a.truth_path.empty()) truth = load_input("truth", [&] { return symbols_from_text(read_file(a.truth_path)); });

    const Scene& s = cfg.scene;
    const auto rep = decode_frame(frame, cal, s.receiver_camera(), s.decode, decoder);
    nlohmann::json j = to_json(rep);
    if (truth) {
        if (truth->n() != rep.symbols.n()) fail(ErrorKind::SizeMismatch, "decode: truth size does not match the grid");
        const FrameResult r = frame_result(rep, *truth);
        j["den"] = r.den;
        j["ber_hamming"] = r.ber_hamming;
        j["ber_paper"] = std::isfinite(r.ber_paper) ? nlohmann::json(r.ber_paper) : nlohmann::json(nullptr);
        j["correct_bits"] = r.correct_bits;
        out << "den " << r.den << "\nber_hamming " << format_number(r.ber_hamming) << "\n";
    }
    write_file_atomic(c.out, dump(j));
    return kOk;
}

// ---------------------------------------------------------------------------
// sweep

inline int cmd_sweep(const Common& c, const std::string& spec_path, bool seed_given, std::ostream& out) {
    const std::string config_text = c.config_path.empty() ? std::string() : read_file(c.config_path);
    if (c.out.empty()) fail(ErrorKind::Validation, "sweep: --out is required");
    SweepSpec spec = parse_sweep_spec(read_file(spec_path));
    if (seed_given) spec.seed = c.seed;

    // Config overrides apply on top of each degree's preset.
    KeyValues kv = parse_key_values(config_text);
    kv.erase("preset");
    std::vector<Scene> scenes;
    for (const auto& name : spec.isi_degrees) {
        AppConfig app;
        app.preset = name;
        app.scene = preset_scene(name);
        scenes.push_back(apply_config(std::move(app), kv).scene);
    }

    const SweepResult res = run_sweep(spec, scenes);
    const std::filesystem::path dir(c.out);
    const std::string csv = to_csv(res);
    const std::string json = dump(to_json(res, spec));
    write_file_atomic(dir / "sweep.csv", csv);
    write_file_atomic(dir / "sweep.json", json);

    int failed = 0;
    for (const auto& cell : res.cells) failed += cell.failed;
    out << "wrote " << res.cells.size() << " cell(s) to " << dir.string();
    if (failed) out << " (" << failed << " failed)";
    out << "\n";
    return !res.cells.empty() && failed == static_cast<int>(res.cells.size()) ? kCalibration : kOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"LED-array visible light communication simulator and receiver", "ledvlc"};
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "key = value config file")->check(CLI::ExistingFile);
        sub->add_option("--preset", common.preset, "base preset: table2, degree1, degree2, degree3");
        sub->add_option("--seed", common.seed, "RNG seed");
        sub->add_option("--out", common.out, "output file or directory")->required();
    };

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "render frames and their ground-truth grids");
    add_common(simulate);
    simulate->add_flag("--pilot", sim.pilot, "render the pilot pattern");
    simulate->add_option("--pattern", sim.pattern_path, "0/1 text grid to transmit")->check(CLI::ExistingFile);
    simulate->add_option("--ratio", sim.ratio, "lighting ratio for random patterns")->check(CLI::Range(0.0, 1.0));
    simulate->add_option("--frames", sim.frames, "number of frames");
    simulate->add_option("--max-overlaps", sim.max_overlaps, "overlap cap for random patterns (negative: none)");

    std::string frame_path;
    auto* calibrate = app.add_subcommand("calibrate", "estimate distortion and grid from a pilot frame");
    add_common(calibrate);
    calibrate->add_option("--frame", frame_path, "pilot frame (PGM)")->required();

    DecodeArgs dec;
    auto* decode = app.add_subcommand("decode", "decode an information frame");
    add_common(decode);
    decode->add_option("--frame", dec.frame_path, "information frame (PGM)")->required();
    decode->add_option("--calibration", dec.calibration_path, "calibration report (JSON)")->required();
    decode->add_option("--truth", dec.truth_path, "ground-truth 0/1 grid");
    decode->add_option("--decoder", dec.decoder, "proposed, baseline, lowdensity, proposed_no_alignment");

    std::string spec_path;
    auto* sweep = app.add_subcommand("sweep", "run a parameter sweep");
    add_common(sweep);
    sweep->add_option("--spec", spec_path, "sweep spec file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kValidation;
    }

    try {
        if (*simulate) return cmd_simulate(common, sim, out);
        if (*calibrate) return cmd_calibrate(common, frame_path, out);
        if (*decode) return cmd_decode(common, dec, out);
        return cmd_sweep(common, spec_path, sweep->count("--seed") > 0, out);
    } catch (const Error& e) {
        err << "error";
        if (!e.stage().empty()) err << " [" << e.stage() << "]";
        err << " (" << to_string(e.kind()) << "): " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error (io): " << e.what() << "\n";
        return kIo;
    }
}

}  // namespace ledvlc::cli
