#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <omp.h>
#include <unistd.h>

#include <json.hpp>

#include "nestlab/scan.hpp"

namespace nestlab::scan {

namespace {

using config::format_double;
using nlohmann::json;

std::string opt_num(const std::optional<double>& v) { return v ? format_double(*v) : ""; }
std::string opt_int(const std::optional<int>& v) { return v ? std::to_string(*v) : ""; }

std::string join(const std::vector<std::string>& v, char sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) {
            out.push_back(sep);
        }
        out += v[i];
    }
    return out;
}

std::string join_nums(const std::vector<double>& v) {
    std::vector<std::string> s;
    for (double x : v) {
        s.push_back(format_double(x));
    }
    return join(s, ';');
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (s.empty()) {
        return out;
    }
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

std::string quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') {
            out.push_back('"');
        }
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

std::vector<std::string> parse_csv_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (in_quotes) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            in_quotes = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (in_quotes) {
        throw Error(ErrorCode::ParseError, "unterminated quote in CSV row");
    }
    out.push_back(cur);
    return out;
}

double num(const std::string& s) { return config::to_double("csv field", s); }
std::optional<double> opt_num_from(const std::string& s) {
    return s.empty() ? std::nullopt : std::optional<double>(num(s));
}
std::optional<int> opt_int_from(const std::string& s) {
    return s.empty() ? std::nullopt
                     : std::optional<int>(static_cast<int>(config::to_long("csv field", s)));
}

const char* const kTail[] = {"t", "a", "verdict", "reason", "period", "multiplier",
                             "renorm_period", "renorm_depth", "lambda_hat", "recurrence_exponent",
                             "wr", "bce", "nest_depth", "reliable_levels", "central_levels",
                             "c", "c_bound", "e", "flags", "detail"};

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json opt_json(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

template <class T>
std::optional<T> opt_from(const json& j) {
    return j.is_null() ? std::nullopt : std::optional<T>(j.get<T>());
}

class LockFile {
  public:
    explicit LockFile(std::string path) : path_(std::move(path)) {
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0) {
            throw Error(ErrorCode::IOFailure,
                        "cannot take lock " + path_ + " (another writer, or a stale lock to remove)");
        }
        const std::string pid = std::to_string(::getpid()) + "\n";
        (void)!::write(fd_, pid.data(), pid.size());
    }
    LockFile(const LockFile&) = delete;
    LockFile& operator=(const LockFile&) = delete;
    ~LockFile() {
        ::close(fd_);
        ::unlink(path_.c_str());
    }

  private:
    std::string path_;
    int fd_ = -1;
};

void write_atomically(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.flush();
        if (!out) {
            throw Error(ErrorCode::IOFailure, "cannot write " + tmp);
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw Error(ErrorCode::IOFailure, "cannot rename " + tmp + ": " + ec.message());
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IOFailure, "cannot read " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string manifest_text(const maps::MapFamily& family, const ScanWindow& window,
                          const Budgets& budgets, const ScanOptions& opt, Format format) {
    config::KeyValues kv;
    kv["schema_version"] = std::to_string(kSchemaVersion);
    kv["version"] = NESTLAB_VERSION;
    kv["family"] = maps::to_string(family.id);
    kv["window"] = config::render_window(family, window.ranges);
    if (window.base) {
        std::vector<config::Range> b;
        for (double x : *window.base) {
            b.push_back({x, x});
        }
        kv["base"] = config::render_window(family, b);
    }
    kv["samples"] = std::to_string(opt.samples);
    kv["seed"] = std::to_string(opt.seed);
    kv["sampling"] = to_string(opt.sampling);
    kv["lines"] = std::to_string(opt.lines);
    kv["format"] = format == Format::Csv ? "csv" : "jsonl";
    for (const auto& [k, v] : budgets.to_key_values()) {
        kv["budget." + k] = v;
    }
    std::string out;
    for (const auto& [k, v] : kv) {
        out += k + " = " + v + "\n";
    }
    return out;
}

std::string format_record(const ScanRecord& r, const maps::MapFamily& family, Format f) {
    return f == Format::Csv ? to_csv_row(r) : to_json_line(r, family);
}

ScanRecord parse_record(const maps::MapFamily& family, const std::string& line, Format f) {
    return f == Format::Csv ? from_csv_row(family, line) : from_json_line(line);
}

// Complete, parseable lines with consecutive indices from 0; stops at the first bad one.
std::vector<ScanRecord> valid_prefix(const maps::MapFamily& family, const std::string& content,
                                     Format f, std::size_t& valid_bytes) {
    std::vector<ScanRecord> out;
    std::size_t pos = 0;
    valid_bytes = 0;
    if (f == Format::Csv) {
        const auto nl = content.find('\n');
        if (nl == std::string::npos || content.substr(0, nl) != csv_header(family)) {
            return out;
        }
        pos = nl + 1;
        valid_bytes = pos;
    }
    while (pos < content.size()) {
        const auto nl = content.find('\n', pos);
        if (nl == std::string::npos) {
            break; // torn line
        }
        try {
            ScanRecord r = parse_record(family, content.substr(pos, nl - pos), f);
            if (r.index != static_cast<long>(out.size())) {
                break;
            }
            out.push_back(std::move(r));
        } catch (const Error&) {
            break;
        }
        pos = nl + 1;
        valid_bytes = pos;
    }
    return out;
}

void add_to_summary(ScanSummary& s, const ScanRecord& r) {
    ++s.total;
    switch (r.cls.verdict) {
    case Verdict::Regular: ++s.regular; break;
    case Verdict::CECandidate: ++s.ce_candidate; break;
    case Verdict::Renormalizable: ++s.renormalizable; break;
    case Verdict::Undetermined: ++s.undetermined; break;
    }
}

} // namespace

Format format_for_path(const std::string& path) {
    const auto ext = std::filesystem::path(path).extension().string();
    return ext == ".jsonl" || ext == ".ndjson" ? Format::JsonLines : Format::Csv;
}

std::string csv_header(const maps::MapFamily& family) {
    std::vector<std::string> cols{"schema_version", "index"};
    for (const auto& n : family.parameter_names()) {
        cols.push_back("param_" + n);
    }
    for (const char* c : kTail) {
        cols.emplace_back(c);
    }
    return join(cols, ',');
}

std::string to_csv_row(const ScanRecord& r) {
    const auto& c = r.cls;
    std::vector<std::string> f{std::to_string(r.schema_version), std::to_string(r.index)};
    for (double p : r.params) {
        f.push_back(format_double(p));
    }
    f.push_back(opt_num(r.t));
    f.push_back(opt_num(r.a));
    f.push_back(to_string(c.verdict));
    f.push_back(to_string(c.reason));
    f.push_back(opt_int(c.period));
    f.push_back(opt_num(c.multiplier));
    f.push_back(opt_int(c.renorm_period));
    f.push_back(std::to_string(c.renorm_depth));
    f.push_back(opt_num(c.lambda_hat));
    f.push_back(opt_num(c.recurrence_exponent));
    f.push_back(opt_num(c.wr));
    f.push_back(opt_num(c.bce));
    f.push_back(std::to_string(c.nest_depth));
    f.push_back(std::to_string(c.reliable_levels));
    f.push_back(std::to_string(c.central_levels));
    f.push_back(join_nums(c.c));
    f.push_back(opt_num(c.c_bound));
    f.push_back(join_nums(c.e));
    f.push_back(join(c.flags, ';'));
    f.push_back(c.detail);
    for (auto& x : f) {
        x = quote(x);
    }
    return join(f, ',');
}

ScanRecord from_csv_row(const maps::MapFamily& family, const std::string& line) {
    const auto f = parse_csv_fields(line);
    const std::size_t dim = static_cast<std::size_t>(family.parameter_dim());
    const std::size_t want = 2 + dim + std::size(kTail);
    if (f.size() != want) {
        throw Error(ErrorCode::ParseError, "CSV row has " + std::to_string(f.size()) +
                                               " fields, expected " + std::to_string(want));
    }
    ScanRecord r;
    r.schema_version = static_cast<int>(config::to_long("schema_version", f[0]));
    r.index = config::to_long("index", f[1]);
    for (std::size_t k = 0; k < dim; ++k) {
        r.params.push_back(num(f[2 + k]));
    }
    std::size_t i = 2 + dim;
    auto& c = r.cls;
    r.t = opt_num_from(f[i++]);
    r.a = opt_num_from(f[i++]);
    c.verdict = verdict_from_string(f[i++]);
    c.reason = reason_from_string(f[i++]);
    c.period = opt_int_from(f[i++]);
    c.multiplier = opt_num_from(f[i++]);
    c.renorm_period = opt_int_from(f[i++]);
    c.renorm_depth = static_cast<int>(config::to_long("renorm_depth", f[i++]));
    c.lambda_hat = opt_num_from(f[i++]);
    c.recurrence_exponent = opt_num_from(f[i++]);
    c.wr = opt_num_from(f[i++]);
    c.bce = opt_num_from(f[i++]);
    c.nest_depth = static_cast<int>(config::to_long("nest_depth", f[i++]));
    c.reliable_levels = static_cast<int>(config::to_long("reliable_levels", f[i++]));
    c.central_levels = static_cast<int>(config::to_long("central_levels", f[i++]));
    for (const auto& s : split(f[i++], ';')) {
        c.c.push_back(num(s));
    }
    c.c_bound = opt_num_from(f[i++]);
    for (const auto& s : split(f[i++], ';')) {
        c.e.push_back(num(s));
    }
    c.flags = split(f[i++], ';');
    c.detail = f[i++];
    return r;
}

std::string to_json_line(const ScanRecord& r, const maps::MapFamily& family) {
    const auto& c = r.cls;
    json params = json::object();
    const auto names = family.parameter_names();
    for (std::size_t k = 0; k < r.params.size(); ++k) {
        params[names[k]] = r.params[k];
    }
    json j = {
        {"schema_version", r.schema_version},
        {"index", r.index},
        {"family", maps::to_string(family.id)},
        {"params", params},
        {"param_values", r.params},
        {"t", opt_json(r.t)},
        {"a", opt_json(r.a)},
        {"verdict", to_string(c.verdict)},
        {"reason", to_string(c.reason)},
        {"period", opt_json(c.period)},
        {"multiplier", opt_json(c.multiplier)},
        {"renorm_period", opt_json(c.renorm_period)},
        {"renorm_depth", c.renorm_depth},
        {"lambda_hat", opt_json(c.lambda_hat)},
        {"recurrence_exponent", opt_json(c.recurrence_exponent)},
        {"wr", opt_json(c.wr)},
        {"bce", opt_json(c.bce)},
        {"nest_depth", c.nest_depth},
        {"reliable_levels", c.reliable_levels},
        {"central_levels", c.central_levels},
        {"c", c.c},
        {"c_bound", opt_json(c.c_bound)},
        {"e", c.e},
        {"flags", c.flags},
        {"detail", c.detail},
    };
    return j.dump();
}

ScanRecord from_json_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("bad JSON line: ") + e.what());
    }
    try {
        ScanRecord r;
        auto& c = r.cls;
        r.schema_version = j.at("schema_version").get<int>();
        r.index = j.at("index").get<long>();
        r.params = j.at("param_values").get<std::vector<double>>();
        r.t = opt_from<double>(j.at("t"));
        r.a = opt_from<double>(j.at("a"));
        c.verdict = verdict_from_string(j.at("verdict").get<std::string>());
        c.reason = reason_from_string(j.at("reason").get<std::string>());
        c.period = opt_from<int>(j.at("period"));
        c.multiplier = opt_from<double>(j.at("multiplier"));
        c.renorm_period = opt_from<int>(j.at("renorm_period"));
        c.renorm_depth = j.at("renorm_depth").get<int>();
        c.lambda_hat = opt_from<double>(j.at("lambda_hat"));
        c.recurrence_exponent = opt_from<double>(j.at("recurrence_exponent"));
        c.wr = opt_from<double>(j.at("wr"));
        c.bce = opt_from<double>(j.at("bce"));
        c.nest_depth = j.at("nest_depth").get<int>();
        c.reliable_levels = j.at("reliable_levels").get<int>();
        c.central_levels = j.at("central_levels").get<int>();
        c.c = j.at("c").get<std::vector<double>>();
        c.c_bound = opt_from<double>(j.at("c_bound"));
        c.e = j.at("e").get<std::vector<double>>();
        c.flags = j.at("flags").get<std::vector<std::string>>();
        c.detail = j.at("detail").get<std::string>();
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("bad scan record: ") + e.what());
    }
}

void export_records(const std::vector<ScanRecord>& records, const maps::MapFamily& family,
                    Format format, const std::string& path) {
    if (records.empty()) {
        throw Error(ErrorCode::InvalidArgument, "nothing to export");
    }
    std::string out;
    if (format == Format::Csv) {
        out += csv_header(family) + "\n";
    }
    for (const auto& r : records) {
        out += format_record(r, family, format) + "\n";
    }
    write_atomically(path, out);
}

std::vector<ScanRecord> read_records(const maps::MapFamily& family, const std::string& path) {
    std::size_t bytes = 0;
    return valid_prefix(family, read_file(path), format_for_path(path), bytes);
}

ScanSummary scan_to_file(const maps::MapFamily& family, const ScanWindow& window,
                         const Budgets& budgets, const ScanOptions& opt, const std::string& path) {
    if (opt.samples < 1) {
        throw Error(ErrorCode::InvalidArgument, "samples must be >= 1");
    }
    budgets.validate();
    const Format format = format_for_path(path);
    LockFile lock(path + ".lock");
    const std::string manifest_path = path + ".manifest";
    const std::string manifest = manifest_text(family, window, budgets, opt, format);

    ScanSummary summary;
    long done = 0;
    if (std::filesystem::exists(path)) {
        if (!std::filesystem::exists(manifest_path)) {
            throw Error(ErrorCode::IOFailure, path + " exists without a manifest; refusing to append");
        }
        if (read_file(manifest_path) != manifest) {
            throw Error(ErrorCode::IOFailure,
                        "manifest mismatch: " + path + " was written with different scan inputs");
        }
        const std::string content = read_file(path);
        std::size_t bytes = 0;
        const auto kept = valid_prefix(family, content, format, bytes);
        if (bytes == 0 && format == Format::Csv) {
            write_atomically(path, csv_header(family) + "\n");
        } else if (bytes != content.size()) {
            write_atomically(path, content.substr(0, bytes));
        }
        for (const auto& r : kept) {
            add_to_summary(summary, r);
        }
        done = std::min<long>(static_cast<long>(kept.size()), opt.samples);
        summary.resumed = done;
    } else {
        write_atomically(manifest_path, manifest);
        write_atomically(path, format == Format::Csv ? csv_header(family) + "\n" : "");
    }

    std::FILE* out = std::fopen(path.c_str(), "ab");
    if (out == nullptr) {
        throw Error(ErrorCode::IOFailure, "cannot append to " + path);
    }
    bool write_failed = false;
    auto emit = [&](const ScanRecord& r) {
        const std::string line = format_record(r, family, format) + "\n";
        if (std::fwrite(line.data(), 1, line.size(), out) != line.size() || std::fflush(out) != 0) {
            write_failed = true;
        }
        add_to_summary(summary, r);
        ++summary.computed;
    };
    std::exception_ptr failure;
    if (opt.exec == Exec::Serial) {
        for (long i = done; i < opt.samples && !write_failed; ++i) {
            emit(classify_sample(family, window, budgets, opt, i));
        }
    } else {
        const int threads = opt.jobs > 0 ? opt.jobs : omp_get_max_threads();
#pragma omp parallel for ordered schedule(dynamic, 1) num_threads(threads)
        for (long i = done; i < opt.samples; ++i) {
            std::optional<ScanRecord> r;
            try {
                r = classify_sample(family, window, budgets, opt, i);
            } catch (...) {
#pragma omp critical(scan_file_failure)
                if (!failure) {
                    failure = std::current_exception();
                }
            }
#pragma omp ordered
            if (r && !failure && !write_failed) {
                emit(*r);
            }
        }
    }
    std::fclose(out);
    if (failure) {
        std::rethrow_exception(failure);
    }
    if (write_failed) {
        throw Error(ErrorCode::IOFailure, "write to " + path + " failed");
    }
    return summary;
}

} // namespace nestlab::scan
