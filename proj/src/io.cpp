#include "mcp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "mcp/error.hpp"

namespace mcp::io {

using json = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

double parse_number(std::string_view text, std::string_view column, std::size_t row) {
    double v = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) {
        throw Error(ErrorKind::InvalidData, "column '" + std::string(column) + "' row " +
                                                std::to_string(row + 1) + ": '" +
                                                std::string(text) + "' is not a number");
    }
    return v;
}

std::vector<double> numeric_column(const CsvTable& t, std::string_view name) {
    const long c = t.column(name);
    if (c < 0) return {};
    std::vector<double> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& cell = t.rows[r][static_cast<std::size_t>(c)];
        if (cell.empty()) {
            throw Error(ErrorKind::InvalidData, "column '" + std::string(name) + "' row " +
                                                    std::to_string(r + 1) + " is empty");
        }
        out.push_back(parse_number(cell, name, r));
    }
    return out;
}

Observed observed_column(const CsvTable& t, std::string_view name) {
    const long c = t.column(name);
    if (c < 0) return {};
    Observed out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& cell = t.rows[r][static_cast<std::size_t>(c)];
        if (cell.empty() || cell == "nan" || cell == "NaN" || cell == "NA") {
            out.emplace_back(std::nullopt);
        } else {
            out.emplace_back(parse_number(cell, name, r));
        }
    }
    return out;
}

std::vector<Date> date_column(const CsvTable& t) {
    const long c = t.column("date");
    if (c < 0) throw Error(ErrorKind::InvalidData, "missing required column 'date'");
    std::vector<Date> out;
    out.reserve(t.rows.size());
    for (const auto& row : t.rows) out.push_back(parse_date(row[static_cast<std::size_t>(c)]));
    return out;
}

void require_columns(const CsvTable& t, std::initializer_list<std::string_view> names) {
    std::string missing;
    for (auto n : names) {
        if (t.column(n) < 0) missing += (missing.empty() ? "" : ", ") + std::string(n);
    }
    if (!missing.empty()) {
        std::string have;
        for (const auto& h : t.header) have += (have.empty() ? "" : ",") + h;
        throw Error(ErrorKind::InvalidData,
                    "missing required column(s) " + missing + " (header: " + have + ")");
    }
}

std::string cell(double v) { return format_number(v); }

std::string cell(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

json scale_json(const ColumnScale& s) { return json{{"mean", s.mean}, {"scale", s.scale}}; }

ColumnScale scale_from(const json& j) {
    return {j.at("mean").get<double>(), j.at("scale").get<double>()};
}

json kge_value(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double kge_from(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

LossKind parse_loss_kind(std::string_view s) {
    if (s == "kge_q") return LossKind::KgeQ;
    if (s == "kge_swe") return LossKind::KgeSwe;
    if (s == "kge_joint") return LossKind::KgeJoint;
    throw Error(ErrorKind::ConfigError, "unknown loss kind '" + std::string(s) + "'");
}

}  // namespace

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::string format_date(Date date) {
    const std::chrono::year_month_day ymd{date};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

Date parse_date(std::string_view text) {
    int y = 0;
    unsigned m = 0, d = 0;
    const std::string s(text);
    char tail = 0;
    if (std::sscanf(s.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
        throw Error(ErrorKind::InvalidData, "'" + s + "' is not an ISO-8601 date");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                          std::chrono::day{d}};
    if (!ymd.ok()) throw Error(ErrorKind::InvalidData, "'" + s + "' is not a calendar date");
    return Date{ymd};
}

std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

long CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<long>(i);
    }
    return -1;
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "'");
    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw Error(ErrorKind::InvalidData, path.string() + ":" + std::to_string(lineno) +
                                                    ": expected " +
                                                    std::to_string(t.header.size()) +
                                                    " fields, found " +
                                                    std::to_string(fields.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    if (t.header.empty()) throw Error(ErrorKind::InvalidData, "'" + path.string() + "' is empty");
    return t;
}

void write_text(const fs::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw Error(ErrorKind::IoError, "write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ForcingSeries read_forcing(const fs::path& path) {
    const CsvTable t = read_csv(path);
    require_columns(t, {"date", "precip"});
    if (t.rows.empty()) throw Error(ErrorKind::InvalidData, "'" + path.string() + "' has no rows");
    ForcingSeries f;
    f.dates = date_column(t);
    f.precip = numeric_column(t, "precip");
    f.pet = numeric_column(t, "pet");
    f.tmean = numeric_column(t, "tmean");
    f.tmin = numeric_column(t, "tmin");
    f.tmax = numeric_column(t, "tmax");
    f.vpd = numeric_column(t, "vpd");
    f.srad = numeric_column(t, "srad");
    f.validate();
    return f;
}

void write_forcing(const fs::path& path, const ForcingSeries& f) {
    struct Col {
        const char* name;
        const std::vector<double>* v;
    };
    const Col cols[] = {{"precip", &f.precip}, {"pet", &f.pet},   {"tmean", &f.tmean},
                        {"tmin", &f.tmin},     {"tmax", &f.tmax}, {"vpd", &f.vpd},
                        {"srad", &f.srad}};
    std::string out = "date";
    for (const auto& c : cols) {
        if (!c.v->empty()) out += std::string(",") + c.name;
    }
    out += '\n';
    for (std::size_t i = 0; i < f.size(); ++i) {
        out += format_date(f.dates[i]);
        for (const auto& c : cols) {
            if (!c.v->empty()) out += ',' + cell((*c.v)[i]);
        }
        out += '\n';
    }
    write_text(path, out);
}

TargetSeries read_targets(const fs::path& path, const std::vector<Date>& dates) {
    const CsvTable t = read_csv(path);
    require_columns(t, {"date"});
    if (t.column("streamflow") < 0 && t.column("swe") < 0) {
        throw Error(ErrorKind::InvalidData,
                    "'" + path.string() + "' needs a 'streamflow' or 'swe' column");
    }
    const auto tdates = date_column(t);
    if (tdates != dates) {
        throw Error(ErrorKind::InvalidData,
                    "target dates in '" + path.string() + "' do not match the forcing dates");
    }
    TargetSeries s;
    s.streamflow = observed_column(t, "streamflow");
    s.swe = observed_column(t, "swe");
    return s;
}

void write_targets(const fs::path& path, const std::vector<Date>& dates,
                   const TargetSeries& targets) {
    std::string out = "date";
    if (targets.has_streamflow()) out += ",streamflow";
    if (targets.has_swe()) out += ",swe";
    out += '\n';
    for (std::size_t i = 0; i < dates.size(); ++i) {
        out += format_date(dates[i]);
        if (targets.has_streamflow()) out += ',' + cell(targets.streamflow[i]);
        if (targets.has_swe()) out += ',' + cell(targets.swe[i]);
        out += '\n';
    }
    write_text(path, out);
}

std::vector<CatchmentAttributes> read_attributes(const fs::path& path) {
    const CsvTable t = read_csv(path);
    require_columns(t, {"catchment_id"});
    auto text = [&](const std::vector<std::string>& row, std::string_view name) {
        const long c = t.column(name);
        return c < 0 ? std::string() : row[static_cast<std::size_t>(c)];
    };
    auto number = [&](const std::vector<std::string>& row, std::string_view name, std::size_t r) {
        const std::string s = text(row, name);
        return s.empty() ? 0.0 : parse_number(s, name, r);
    };
    std::vector<CatchmentAttributes> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        CatchmentAttributes a;
        a.id = text(row, "catchment_id");
        a.elevation_m = number(row, "elevation_m", r);
        a.aridity_index = number(row, "aridity_index", r);
        a.snow_fraction = number(row, "snow_fraction", r);
        a.forest_fraction = number(row, "forest_fraction", r);
        std::stringstream tags(text(row, "region_tags"));
        for (std::string tag; std::getline(tags, tag, ';');) {
            if (!trim(tag).empty()) a.region_tags.insert(trim(tag));
        }
        a.climate_code_p1 = text(row, "climate_code_p1");
        a.climate_code_p2 = text(row, "climate_code_p2");
        out.push_back(std::move(a));
    }
    return out;
}

void write_attributes(const fs::path& path, const std::vector<CatchmentAttributes>& rows) {
    std::string out =
        "catchment_id,elevation_m,aridity_index,snow_fraction,forest_fraction,region_tags,"
        "climate_code_p1,climate_code_p2\n";
    for (const auto& a : rows) {
        std::string tags;
        for (const auto& tag : a.region_tags) tags += (tags.empty() ? "" : ";") + tag;
        out += a.id + ',' + cell(a.elevation_m) + ',' + cell(a.aridity_index) + ',' +
               cell(a.snow_fraction) + ',' + cell(a.forest_fraction) + ',' + tags + ',' +
               a.climate_code_p1 + ',' + a.climate_code_p2 + '\n';
    }
    write_text(path, out);
}

void write_split(const fs::path& path, const std::vector<Date>& dates,
                 const SplitAssignment& split) {
    if (dates.size() != split.size()) {
        throw Error(ErrorKind::InvalidData, "split and date lengths differ");
    }
    std::string out = "date,label\n";
    for (std::size_t i = 0; i < dates.size(); ++i) {
        out += format_date(dates[i]);
        out += ',';
        out += to_string(split.labels[i]);
        out += '\n';
    }
    write_text(path, out);
}

SplitAssignment read_split(const fs::path& path, const std::vector<Date>& dates) {
    const CsvTable t = read_csv(path);
    require_columns(t, {"date", "label"});
    if (date_column(t) != dates) {
        throw Error(ErrorKind::InvalidData,
                    "split dates in '" + path.string() + "' do not match the record");
    }
    SplitAssignment s;
    const auto c = static_cast<std::size_t>(t.column("label"));
    for (const auto& row : t.rows) s.labels.push_back(parse_split_label(row[c]));
    return s;
}

void write_simulation(const fs::path& path, const std::vector<Date>& dates,
                      const SimulationOutput& sim) {
    const auto& fx = sim.fluxes;
    struct Col {
        const char* name;
        const std::vector<double>* v;
    };
    const Col cols[] = {{"q_sim", &sim.q_sim},
                        {"swe_sim", &sim.swe_sim},
                        {"soil_state", &sim.soil_state},
                        {"snow_state", &sim.snow_state},
                        {"soil_input", &fx.soil_input},
                        {"soil_outflow", &fx.soil_outflow},
                        {"soil_loss", &fx.soil_loss},
                        {"mass_relax", &fx.mass_relax},
                        {"snowfall", &fx.snowfall},
                        {"rainfall", &fx.rainfall},
                        {"melt", &fx.melt},
                        {"snow_loss", &fx.snow_loss},
                        {"g_O", &fx.g_O},
                        {"g_L", &fx.g_L},
                        {"g_R", &fx.g_R},
                        {"g_RS", &fx.g_RS},
                        {"g_M", &fx.g_M},
                        {"g_SL", &fx.g_SL},
                        {"g_SR", &fx.g_SR}};
    // Every column is always present so the header does not depend on the spec.
    std::string out = "date";
    for (const auto& c : cols) out += std::string(",") + c.name;
    out += '\n';
    for (std::size_t i = 0; i < dates.size(); ++i) {
        out += format_date(dates[i]);
        for (const auto& c : cols) {
            out += ',';
            if (i < c.v->size()) out += cell((*c.v)[i]);
        }
        out += '\n';
    }
    write_text(path, out);
}

void write_training_log(const fs::path& path, const std::vector<LogEntry>& log) {
    std::string out = "restart,epoch,train_kge,select_kge\n";
    for (const auto& e : log) {
        out += std::to_string(e.restart) + ',' + std::to_string(e.epoch) + ',' +
               cell(e.train_kge) + ',' + cell(e.select_kge) + '\n';
    }
    write_text(path, out);
}

void write_restart_summary(const fs::path& path, const TrainOutcome& outcome) {
    std::string out = "restart,seed,status,clipped,train_kge,select_kge,message\n";
    for (const auto& r : outcome.restarts) {
        const bool ok = r.status == RestartStatus::Ok;
        std::string msg = r.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        out += std::to_string(r.restart) + ',' + std::to_string(r.seed) + ',' +
               (ok ? "ok" : "failed") + ',' + (r.clipped ? "1" : "0") + ',' +
               (ok ? cell(r.train_kge) : "") + ',' + (ok ? cell(r.select_kge) : "") + ',' + msg +
               '\n';
    }
    out += "all,,";
    out += to_string(outcome.status);
    out += ',';
    out += outcome.retried_with_clip ? "1" : "0";
    out += ",,,\n";
    write_text(path, out);
}

Checkpoint Checkpoint::from_outcome(std::string catchment_id, const TrainOutcome& outcome,
                                    std::uint64_t seed) {
    Checkpoint c;
    c.catchment_id = std::move(catchment_id);
    c.spec = outcome.spec;
    c.strategy = outcome.strategy;
    c.loss = outcome.loss;
    c.status = outcome.status;
    c.params = outcome.best_params;
    c.scaling = outcome.scaling;
    c.best_select_kge = outcome.best_select_kge;
    c.best_train_kge = outcome.best_train_kge;
    c.seed = seed;
    return c;
}

std::string checkpoint_json(const Checkpoint& c) {
    json params = json::object();
    for (std::size_t i = 0; i < c.params.size(); ++i) params[c.params.names[i]] = c.params[i];
    const bool ok = c.status == TrainStatus::Converged;
    json j{
        {"catchment_id", c.catchment_id},
        {"spec", c.spec.name()},
        {"strategy", std::string(to_string(c.strategy))},
        {"loss", {{"kind", std::string(to_string(c.loss.kind))}, {"w_q", c.loss.w_q},
                  {"w_s", c.loss.w_s}}},
        {"status", std::string(to_string(c.status))},
        {"seed", c.seed},
        {"best_train_kge", ok ? kge_value(c.best_train_kge) : json(nullptr)},
        {"best_select_kge", ok ? kge_value(c.best_select_kge) : json(nullptr)},
        {"params", params},
        {"scaling",
         {{"pet", scale_json(c.scaling.pet)},
          {"tmean", scale_json(c.scaling.tmean)},
          {"tmin", scale_json(c.scaling.tmin)},
          {"tmax", scale_json(c.scaling.tmax)},
          {"vpd", scale_json(c.scaling.vpd)},
          {"srad", scale_json(c.scaling.srad)},
          {"flux_ref", c.scaling.flux_ref}}},
    };
    return j.dump(2) + '\n';
}

Checkpoint parse_checkpoint(std::string_view text) {
    try {
        const json j = json::parse(text);
        Checkpoint c;
        c.catchment_id = j.value("catchment_id", "");
        c.spec = ModelSpec::parse(j.at("spec").get<std::string>());
        c.strategy = parse_strategy(j.value("strategy", "none"));
        if (j.contains("loss")) {
            const auto& l = j.at("loss");
            c.loss = {parse_loss_kind(l.at("kind").get<std::string>()), l.at("w_q").get<double>(),
                      l.at("w_s").get<double>()};
        }
        const std::string status = j.value("status", "Converged");
        c.status = status == "Converged" ? TrainStatus::Converged : TrainStatus::FailedAllRestarts;
        c.seed = j.value("seed", std::uint64_t{0});
        c.best_train_kge = kge_from(j.value("best_train_kge", json(nullptr)));
        c.best_select_kge = kge_from(j.value("best_select_kge", json(nullptr)));
        const auto names = param_names(c.spec);
        std::vector<double> values;
        const auto& p = j.at("params");
        for (const auto& n : names) {
            if (!p.contains(n)) {
                throw Error(ErrorKind::ConfigError,
                            "checkpoint for " + c.spec.name() + " lacks slot '" + n + "'");
            }
            values.push_back(p.at(n).get<double>());
        }
        if (p.size() != names.size()) {
            throw Error(ErrorKind::ConfigError, "checkpoint for " + c.spec.name() + " has " +
                                                    std::to_string(p.size()) + " slots, expected " +
                                                    std::to_string(names.size()));
        }
        c.params = ParameterVector::for_spec(c.spec, std::move(values));
        if (j.contains("scaling")) {
            const auto& s = j.at("scaling");
            c.scaling.pet = scale_from(s.at("pet"));
            c.scaling.tmean = scale_from(s.at("tmean"));
            c.scaling.tmin = scale_from(s.at("tmin"));
            c.scaling.tmax = scale_from(s.at("tmax"));
            c.scaling.vpd = scale_from(s.at("vpd"));
            c.scaling.srad = scale_from(s.at("srad"));
            c.scaling.flux_ref = s.at("flux_ref").get<double>();
        }
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("malformed checkpoint: ") + e.what());
    }
}

void write_checkpoint(const fs::path& path, const Checkpoint& checkpoint) {
    write_text(path, checkpoint_json(checkpoint));
}

Checkpoint read_checkpoint(const fs::path& path) { return parse_checkpoint(read_text(path)); }

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::string out(kMetricsHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += r.catchment_id + ',' + r.spec + ',' + r.subset;
        if (r.kge) {
            const auto& k = *r.kge;
            for (double v : {k.r, k.alpha, k.beta, k.kge, k.kge_ss, k.alpha_star, k.beta_star}) {
                out += ',' + cell(v);
            }
        } else {
            out += ",,,,,,,";
        }
        out += '\n';
    }
    return out;
}

std::string selection_csv(const std::vector<SelectionBlock>& blocks) {
    std::string out(kSelectionHeader);
    out += '\n';
    for (const auto& b : blocks) {
        if (!b.report) {
            for (const auto& c : b.candidates) {
                out += b.catchment_id + ',' + c.name + ',' +
                       std::to_string(c.model_params + kPdfParameterCount) + ',' + b.status +
                       ",,,,0,0\n";
            }
            continue;
        }
        const auto& rep = *b.report;
        for (std::size_t i = 0; i < rep.candidates.size(); ++i) {
            const auto& c = rep.candidates[i];
            out += b.catchment_id + ',' + c.name + ',' + std::to_string(c.k) + ',';
            if (c.valid) {
                out += std::string(to_string(c.fit.family)) + ',' + cell(c.fit.log_likelihood) +
                       ',' + cell(c.aic) + ',' + cell(c.kge_ss);
            } else {
                out += c.status + ",,,";
            }
            out += std::string(",") + (i == rep.winner_by_aic ? "1" : "0") + ',' +
                   (i == rep.winner_by_kge ? "1" : "0") + '\n';
        }
    }
    return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::string out(kSummaryHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += r.spec + ',' + r.group + ',' + r.statistic + ',' + std::to_string(r.count) + ',' +
               cell(r.value) + '\n';
    }
    return out;
}

}  // namespace mcp::io
