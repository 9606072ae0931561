#include "tracelens/evaluator.hpp"

#include "tracelens/errors.hpp"
#include "tracelens/text_util.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>

namespace tracelens {

namespace fs = std::filesystem;

std::string shell_quote(std::string_view s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    out += '\'';
    return out;
}

std::optional<json> find_score_object(std::string_view text) {
    std::size_t end = text.size();
    while (end > 0) {
        std::size_t begin = text.rfind('\n', end - 1);
        begin = begin == std::string_view::npos ? 0 : begin + 1;
        const auto line = trim(text.substr(begin, end - begin));
        if (!line.empty() && line.front() == '{') {
            try {
                auto j = json::parse(line);
                if (j.is_object() && j.contains("score")) return j;
            } catch (const json::exception&) {
            }
        }
        if (begin == 0) break;
        end = begin - 1;
    }
    if (auto j = extract_json_object(text); j && j->contains("score")) return j;
    return std::nullopt;
}

namespace {

class TempDir {
public:
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "tracelens-eval-XXXXXX").string();
        if (!::mkdtemp(tmpl.data())) throw IoError("temp-dir", std::strerror(errno));
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

struct ProcessResult {
    std::string out;
    std::string err;
    int wait_status = 0;
    bool timed_out = false;
    double wall_time = 0.0;
};

ProcessResult run_shell(const std::string& command, const fs::path& cwd, double timeout) {
    int out_pipe[2], err_pipe[2];
    if (::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0)
        throw IoError("pipe", std::strerror(errno));

    const std::string cwd_str = cwd.string();
    const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
    const auto start = std::chrono::steady_clock::now();
    const pid_t pid = ::fork();
    if (pid < 0) throw IoError("fork", std::strerror(errno));
    if (pid == 0) {
        ::setpgid(0, 0);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::dup2(err_pipe[1], STDERR_FILENO);
        int devnull = ::open("/dev/null", O_RDONLY);
        if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
        if (!cwd_str.empty() && ::chdir(cwd_str.c_str()) != 0) ::_exit(126);
        ::execv("/bin/sh", const_cast<char* const*>(argv));
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);

    ProcessResult r;
    const auto deadline = start + std::chrono::duration<double>(timeout);
    pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    std::string* sinks[2] = {&r.out, &r.err};
    int open_fds = 2;
    char buf[65536];
    while (open_fds > 0) {
        const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) {
            r.timed_out = true;
            break;
        }
        const int n = ::poll(fds, 2, static_cast<int>(std::min<long long>(remaining.count(), 1000)));
        if (n < 0 && errno != EINTR) break;
        for (int i = 0; i < 2; ++i) {
            if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            const ssize_t got = ::read(fds[i].fd, buf, sizeof buf);
            if (got > 0) {
                sinks[i]->append(buf, static_cast<std::size_t>(got));
            } else if (got == 0 || errno != EINTR) {
                ::close(fds[i].fd);
                fds[i].fd = -1;
                --open_fds;
            }
        }
    }
    if (r.timed_out) ::kill(-pid, SIGKILL);
    for (auto& f : fds)
        if (f.fd >= 0) ::close(f.fd);

    // Pipes can close before the process exits; keep honouring the deadline.
    while (true) {
        const pid_t w = ::waitpid(pid, &r.wait_status, r.timed_out ? 0 : WNOHANG);
        if (w == pid) break;
        if (w < 0 && errno != EINTR) break;
        if (std::chrono::steady_clock::now() >= deadline) {
            r.timed_out = true;
            ::kill(-pid, SIGKILL);
            continue;
        }
        ::usleep(2000);
    }
    if (r.timed_out) ::kill(-pid, SIGKILL);
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::string program_file_name(Dialect d) { return d == Dialect::py_like ? "program.py" : "program.cpp"; }

}  // namespace

EvaluatorRunner::EvaluatorRunner(EvaluatorOptions options) : options_(std::move(options)) {
    options_.max_concurrent = std::max<std::size_t>(1, options_.max_concurrent);
}

Evaluation EvaluatorRunner::evaluate(const EvalRequest& request, const std::string& candidate_id) {
    const auto& env = request.environment;
    if (env.evaluator_command.find(kProgramPlaceholder) == std::string::npos)
        throw InvalidArgument("no-placeholder", "evaluator command lacks {program}: " + env.evaluator_command);
    if (!(env.timeout > 0)) throw InvalidArgument("bad-timeout", "evaluator timeout must be positive");

    {
        std::unique_lock lock(mutex_);
        slot_free_.wait(lock, [&] { return running_ < options_.max_concurrent; });
        ++running_;
    }
    struct Release {
        EvaluatorRunner* self;
        ~Release() {
            {
                std::lock_guard lock(self->mutex_);
                --self->running_;
            }
            self->slot_free_.notify_one();
        }
    } release{this};

    TempDir dir;
    const fs::path program = dir.path() / program_file_name(env.dialect);
    {
        std::ofstream out(program, std::ios::binary);
        out << request.program_source;
        if (!out) throw IoError("write-program", "cannot write " + program.string());
    }

    std::string command = env.evaluator_command;
    const std::string quoted = shell_quote(program.string());
    for (std::size_t pos = command.find(kProgramPlaceholder); pos != std::string::npos;
         pos = command.find(kProgramPlaceholder, pos + quoted.size()))
        command.replace(pos, kProgramPlaceholder.size(), quoted);

    const ProcessResult pr = run_shell(command, options_.working_dir, env.timeout);

    Evaluation ev;
    ev.candidate_id = candidate_id;
    ev.stdout_text = pr.out;
    ev.stderr_text = pr.err;
    ev.wall_time = pr.wall_time;
    if (pr.timed_out) {
        ev.status = EvalStatus::timeout;
        return ev;
    }
    ev.status = EvalStatus::error;
    if (!WIFEXITED(pr.wait_status)) {
        ev.extra["reason"] = "signal " + std::to_string(WTERMSIG(pr.wait_status));
        return ev;
    }
    if (const int code = WEXITSTATUS(pr.wait_status); code != 0) {
        ev.extra["reason"] = "exit " + std::to_string(code);
        return ev;
    }
    const auto obj = find_score_object(pr.out);
    if (!obj) {
        ev.extra["reason"] = "no score object on stdout";
        return ev;
    }
    if (auto m = obj->find("metrics"); m != obj->end() && m->is_object())
        for (const auto& [k, v] : m->items())
            if (v.is_number()) ev.metrics[k] = v.get<double>();
    if (auto v = obj->find("valid"); v != obj->end() && v->is_boolean() && !v->get<bool>()) {
        ev.extra["reason"] = "evaluator reported valid=false";
        return ev;
    }
    const auto& s = (*obj)["score"];
    if (!s.is_number() || !std::isfinite(s.get<double>())) {
        ev.extra["reason"] = "score is not a finite number";
        return ev;
    }
    ev.status = EvalStatus::ok;
    ev.score = s.get<double>();
    return ev;
}

Evaluation evaluate_candidate(const EvalRequest& request) {
    EvaluatorRunner runner;
    return runner.evaluate(request);
}

}  // namespace tracelens
