#include "askit/sandbox.hpp"

#include <fcntl.h>
#include <linux/landlock.h>
#include <poll.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/resource.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace askit {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Newer than the installed uapi header; layout is append-only.
struct RulesetAttr {
    std::uint64_t handled_access_fs;
    std::uint64_t handled_access_net;
};

constexpr std::uint64_t kAccessRefer = 1ULL << 13;
constexpr std::uint64_t kAccessTruncate = 1ULL << 14;
constexpr std::uint64_t kNetBindTcp = 1ULL << 0;
constexpr std::uint64_t kNetConnectTcp = 1ULL << 1;

constexpr std::uint64_t kWriteAccess =
    LANDLOCK_ACCESS_FS_WRITE_FILE | LANDLOCK_ACCESS_FS_REMOVE_DIR | LANDLOCK_ACCESS_FS_REMOVE_FILE |
    LANDLOCK_ACCESS_FS_MAKE_CHAR | LANDLOCK_ACCESS_FS_MAKE_DIR | LANDLOCK_ACCESS_FS_MAKE_REG |
    LANDLOCK_ACCESS_FS_MAKE_SOCK | LANDLOCK_ACCESS_FS_MAKE_FIFO | LANDLOCK_ACCESS_FS_MAKE_BLOCK |
    LANDLOCK_ACCESS_FS_MAKE_SYM;

int landlock_abi()
{
    static const int abi = [] {
        long v = syscall(SYS_landlock_create_ruleset, nullptr, 0, LANDLOCK_CREATE_RULESET_VERSION);
        return v < 0 ? 0 : static_cast<int>(v);
    }();
    return abi;
}

void ignore_sigpipe()
{
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    ~Fd() { reset(); }
    Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Fd& operator=(Fd&& o) noexcept
    {
        if (this != &o) {
            reset();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    int get() const noexcept { return fd_; }
    int release() noexcept { return std::exchange(fd_, -1); }
    void reset() noexcept
    {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_ = -1;
};

bool add_path_rule(int ruleset, const char* path, std::uint64_t access)
{
    Fd target(::open(path, O_PATH | O_CLOEXEC));
    if (target.get() < 0) return false;
    landlock_path_beneath_attr rule{};
    rule.allowed_access = access;
    rule.parent_fd = target.get();
    return syscall(SYS_landlock_add_rule, ruleset, LANDLOCK_RULE_PATH_BENEATH, &rule, 0) == 0;
}

/// Ruleset allowing writes only beneath `dir` (and to /dev/null), and no TCP.
Fd make_ruleset(const fs::path& dir)
{
    const int abi = landlock_abi();
    if (abi < 1) return Fd{};
    std::uint64_t write_access = kWriteAccess;
    if (abi >= 2) write_access |= kAccessRefer;
    if (abi >= 3) write_access |= kAccessTruncate;
    RulesetAttr attr{write_access, abi >= 4 ? (kNetBindTcp | kNetConnectTcp) : 0};
    std::size_t attr_size = abi >= 4 ? sizeof(RulesetAttr) : sizeof(std::uint64_t);
    Fd ruleset(static_cast<int>(syscall(SYS_landlock_create_ruleset, &attr, attr_size, 0)));
    if (ruleset.get() < 0) throw Error(std::string("landlock_create_ruleset failed: ") + std::strerror(errno));
    if (!add_path_rule(ruleset.get(), dir.c_str(), write_access)) {
        throw Error("cannot add sandbox rule for " + dir.string() + ": " + std::strerror(errno));
    }
    std::uint64_t file_access = LANDLOCK_ACCESS_FS_WRITE_FILE | (abi >= 3 ? kAccessTruncate : 0);
    add_path_rule(ruleset.get(), "/dev/null", file_access);
    return ruleset;
}

std::string read_file(const fs::path& p, std::size_t limit)
{
    std::ifstream in(p, std::ios::binary);
    std::string out;
    if (!in) return out;
    out.resize(limit);
    in.read(out.data(), static_cast<std::streamsize>(limit));
    out.resize(static_cast<std::size_t>(in.gcount()));
    return out;
}

struct Spawned {
    pid_t pid;
    Fd in;
    Fd out;
};

// PR_SET_PDEATHSIG fires when the forking *thread* exits, so it only suits
// children that are reaped on the thread that started them. Workers outlive
// their starting thread and instead exit when their stdin closes.
Spawned spawn(const std::vector<std::string>& argv, const SandboxOptions& opt, const fs::path& stderr_path,
              bool die_with_thread)
{
    if (argv.empty()) throw Error("spawn: empty argv");
    ignore_sigpipe();
    const fs::path exe = find_executable(argv[0]);

    // Everything the child touches is prepared before fork.
    std::vector<std::string> env_storage = {
        "PATH=/usr/local/bin:/usr/bin:/bin", "HOME=" + opt.writable_dir.string(),
        "TMPDIR=" + opt.writable_dir.string(), "LANG=C.UTF-8", "NODE_PATH=/usr/lib/node_modules"};
    std::vector<char*> envp;
    for (auto& e : env_storage) envp.push_back(e.data());
    envp.push_back(nullptr);
    std::vector<std::string> arg_storage(argv);
    std::vector<char*> args;
    for (auto& a : arg_storage) args.push_back(a.data());
    args.push_back(nullptr);
    const std::string workdir = opt.writable_dir.string();

    int in_pipe[2];
    int out_pipe[2];
    int err_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw Error("pipe2 failed");
    Fd in_r(in_pipe[0]), in_w(in_pipe[1]);
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) throw Error("pipe2 failed");
    Fd out_r(out_pipe[0]), out_w(out_pipe[1]);
    if (::pipe2(err_pipe, O_CLOEXEC) != 0) throw Error("pipe2 failed");
    Fd exec_r(err_pipe[0]), exec_w(err_pipe[1]);
    Fd stderr_fd(::open(stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600));
    if (stderr_fd.get() < 0) throw IoError("cannot create " + stderr_path.string());
    Fd ruleset = make_ruleset(opt.writable_dir);

    const rlim_t cpu_secs = static_cast<rlim_t>(opt.timeout.count() / 1000 + 30);
    const rlim_t fsize = static_cast<rlim_t>(opt.max_file_bytes);

    pid_t pid = ::fork();
    if (pid < 0) throw Error(std::string("fork failed: ") + std::strerror(errno));
    if (pid == 0) {
        // Child: async-signal-safe calls only.
        auto die = [&](int err) {
            int e = err;
            (void)!::write(exec_w.get(), &e, sizeof e);
            ::_exit(127);
        };
        ::setpgid(0, 0);
        if (die_with_thread) ::prctl(PR_SET_PDEATHSIG, SIGKILL);
        int hi_in = ::fcntl(in_r.get(), F_DUPFD, 100);
        int hi_out = ::fcntl(out_w.get(), F_DUPFD, 100);
        int hi_err = ::fcntl(stderr_fd.get(), F_DUPFD, 100);
        int hi_exec = ::fcntl(exec_w.get(), F_DUPFD_CLOEXEC, 100);
        int hi_rules = ruleset.get() >= 0 ? ::fcntl(ruleset.get(), F_DUPFD_CLOEXEC, 100) : -1;
        if (hi_in < 0 || hi_out < 0 || hi_err < 0 || hi_exec < 0) die(errno);
        if (::dup2(hi_in, 0) < 0 || ::dup2(hi_out, 1) < 0 || ::dup2(hi_err, 2) < 0) die(errno);
        if (::dup2(hi_exec, 3) < 0) die(errno);
        ::fcntl(3, F_SETFD, FD_CLOEXEC);
        if (hi_rules >= 0) {
            if (::dup2(hi_rules, 4) < 0) die(errno);
        }
        ::syscall(SYS_close_range, hi_rules >= 0 ? 5U : 4U, ~0U, 0U);
        auto fail = [](int err) {
            int e = err;
            (void)!::write(3, &e, sizeof e);
            ::_exit(127);
        };
        if (::chdir(workdir.c_str()) != 0) fail(errno);
        rlimit cpu{cpu_secs, cpu_secs + 1};
        ::setrlimit(RLIMIT_CPU, &cpu);
        rlimit fsz{fsize, fsize};
        ::setrlimit(RLIMIT_FSIZE, &fsz);
        rlimit core{0, 0};
        ::setrlimit(RLIMIT_CORE, &core);
        if (::prctl(PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0) fail(errno);
        if (hi_rules >= 0) {
            if (::syscall(SYS_landlock_restrict_self, 4, 0) != 0) fail(errno);
            ::close(4);
        }
        ::execve(exe.c_str(), args.data(), envp.data());
        fail(errno);
    }

    in_r.reset();
    out_w.reset();
    exec_w.reset();
    stderr_fd.reset();
    ruleset.reset();
    int child_errno = 0;
    ssize_t n;
    do {
        n = ::read(exec_r.get(), &child_errno, sizeof child_errno);
    } while (n < 0 && errno == EINTR);
    if (n == sizeof child_errno) {
        int status = 0;
        ::waitpid(pid, &status, 0);
        if (child_errno == ENOENT) throw ToolNotFound("cannot execute " + exe.string());
        throw Error("cannot start " + exe.string() + ": " + std::strerror(child_errno));
    }
    return Spawned{pid, std::move(in_w), std::move(out_r)};
}

void kill_group(pid_t pid)
{
    ::kill(-pid, SIGKILL);
    ::kill(pid, SIGKILL);
}

void decode_status(int status, int& exit_code, int& term_signal)
{
    if (WIFEXITED(status)) {
        exit_code = WEXITSTATUS(status);
        term_signal = 0;
    } else if (WIFSIGNALED(status)) {
        exit_code = -1;
        term_signal = WTERMSIG(status);
    }
}

int remaining_ms(Clock::time_point deadline)
{
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return left < 0 ? 0 : static_cast<int>(left);
}

/// Waits for the child to exit; kills it once the deadline passes.
int reap(pid_t pid, Clock::time_point deadline, bool& timed_out)
{
    int status = 0;
    timed_out = false;
    while (true) {
        pid_t r = ::waitpid(pid, &status, WNOHANG);
        if (r == pid) return status;
        if (r < 0 && errno != EINTR) return 0;
        if (Clock::now() >= deadline) {
            timed_out = true;
            kill_group(pid);
            ::waitpid(pid, &status, 0);
            return status;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
}

} // namespace

bool filesystem_isolation_available() { return landlock_abi() >= 1; }

fs::path find_executable(const std::string& program)
{
    auto runnable = [](const fs::path& p) { return ::access(p.c_str(), X_OK) == 0 && !fs::is_directory(p); };
    if (program.find('/') != std::string::npos) {
        if (runnable(program)) return program;
        throw ToolNotFound("executable not found: " + program);
    }
    const char* path_env = std::getenv("PATH");
    std::string path = path_env ? path_env : "/usr/local/bin:/usr/bin:/bin";
    std::stringstream ss(path);
    std::string dir;
    while (std::getline(ss, dir, ':')) {
        if (dir.empty()) continue;
        fs::path candidate = fs::path(dir) / program;
        if (runnable(candidate)) return candidate;
    }
    throw ToolNotFound("executable not found on PATH: " + program);
}

// ---------------------------------------------------------------------------

ScratchDir::ScratchDir(const fs::path& parent, std::string_view prefix)
{
    fs::create_directories(parent);
    std::string tmpl = (parent / (std::string(prefix) + "XXXXXX")).string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw IoError("mkdtemp failed under " + parent.string());
    path_ = fs::canonical(tmpl);
}

ScratchDir::ScratchDir(ScratchDir&& other) noexcept : path_(std::move(other.path_)) { other.path_.clear(); }

ScratchDir::~ScratchDir()
{
    if (path_.empty()) return;
    std::error_code ec;
    fs::remove_all(path_, ec);
}

ProcessResult run_sandboxed(const std::vector<std::string>& argv, std::string_view input,
                            const SandboxOptions& options)
{
    const fs::path stderr_path = options.writable_dir / ".stderr.log";
    auto child = spawn(argv, options, stderr_path, true);
    const auto deadline = Clock::now() + options.timeout;

    ::fcntl(child.in.get(), F_SETFL, O_NONBLOCK);
    std::size_t written = 0;
    if (input.empty()) child.in.reset();

    ProcessResult result;
    bool timed_out = false;
    char buf[65536];
    while (child.out.get() >= 0) {
        pollfd fds[2];
        int nfds = 0;
        fds[nfds++] = pollfd{child.out.get(), POLLIN, 0};
        if (child.in.get() >= 0) fds[nfds++] = pollfd{child.in.get(), POLLOUT, 0};
        int left = remaining_ms(deadline);
        if (left == 0) {
            timed_out = true;
            break;
        }
        int rc = ::poll(fds, static_cast<nfds_t>(nfds), left);
        if (rc < 0 && errno == EINTR) continue;
        if (rc == 0) {
            timed_out = true;
            break;
        }
        if (nfds == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
            ssize_t w = ::write(child.in.get(), input.data() + written, input.size() - written);
            if (w > 0) written += static_cast<std::size_t>(w);
            if (w < 0 && errno != EAGAIN) written = input.size();
            if (written >= input.size()) child.in.reset();
        }
        if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
            ssize_t r = ::read(child.out.get(), buf, sizeof buf);
            if (r > 0) {
                result.out.append(buf, static_cast<std::size_t>(r));
                if (result.out.size() > options.max_output_bytes) {
                    kill_group(child.pid);
                    result.out.resize(options.max_output_bytes);
                }
            } else if (r == 0 || errno != EINTR) {
                child.out.reset();
            }
        }
    }
    if (timed_out) {
        kill_group(child.pid);
        ::waitpid(child.pid, nullptr, 0);
        throw ProcessTimeout("process " + argv[0] + " exceeded " + std::to_string(options.timeout.count()) + " ms");
    }
    child.in.reset();
    bool reap_timeout = false;
    int status = reap(child.pid, deadline, reap_timeout);
    if (reap_timeout) {
        throw ProcessTimeout("process " + argv[0] + " exceeded " + std::to_string(options.timeout.count()) + " ms");
    }
    decode_status(status, result.exit_code, result.term_signal);
    result.err = read_file(stderr_path, 64 * 1024);
    return result;
}

// ---------------------------------------------------------------------------

WorkerProcess::WorkerProcess(const std::vector<std::string>& argv, SandboxOptions options)
    : options_(std::move(options)), stderr_path_(options_.writable_dir / ".stderr.log")
{
    auto child = spawn(argv, options_, stderr_path_, false);
    pid_ = child.pid;
    in_fd_ = child.in.release();
    out_fd_ = child.out.release();
}

WorkerProcess::~WorkerProcess()
{
    if (in_fd_ >= 0) ::close(in_fd_);
    in_fd_ = -1;
    if (pid_ > 0) {
        bool timed_out = false;
        reap(pid_, Clock::now() + std::chrono::milliseconds(200), timed_out);
        pid_ = -1;
    }
    if (out_fd_ >= 0) ::close(out_fd_);
}

void WorkerProcess::kill_child()
{
    if (pid_ <= 0) return;
    kill_group(pid_);
    int status = 0;
    ::waitpid(pid_, &status, 0);
    decode_status(status, exit_code_, term_signal_);
    pid_ = -1;
}

std::optional<std::string> WorkerProcess::request(std::string_view line, std::chrono::milliseconds timeout)
{
    if (pid_ <= 0) return std::nullopt;
    const auto deadline = Clock::now() + timeout;
    std::string payload(line);
    payload += '\n';
    std::size_t written = 0;
    while (written < payload.size()) {
        pollfd pfd{in_fd_, POLLOUT, 0};
        int rc = ::poll(&pfd, 1, remaining_ms(deadline));
        if (rc < 0 && errno == EINTR) continue;
        if (rc == 0) {
            kill_child();
            throw ProcessTimeout("worker did not accept input within " + std::to_string(timeout.count()) + " ms");
        }
        ssize_t w = ::write(in_fd_, payload.data() + written, payload.size() - written);
        if (w < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            finish();
            return std::nullopt;
        }
        written += static_cast<std::size_t>(w);
    }
    char buf[65536];
    while (true) {
        auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string out = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return out;
        }
        pollfd pfd{out_fd_, POLLIN, 0};
        int rc = ::poll(&pfd, 1, remaining_ms(deadline));
        if (rc < 0 && errno == EINTR) continue;
        if (rc == 0) {
            kill_child();
            throw ProcessTimeout("worker did not answer within " + std::to_string(timeout.count()) + " ms");
        }
        ssize_t r = ::read(out_fd_, buf, sizeof buf);
        if (r < 0 && errno == EINTR) continue;
        if (r <= 0) {
            finish();
            return std::nullopt;
        }
        buffer_.append(buf, static_cast<std::size_t>(r));
        if (buffer_.size() > options_.max_output_bytes) {
            kill_child();
            throw Error("worker response exceeds " + std::to_string(options_.max_output_bytes) + " bytes");
        }
    }
}

ProcessResult WorkerProcess::finish()
{
    if (in_fd_ >= 0) {
        ::close(in_fd_);
        in_fd_ = -1;
    }
    if (pid_ > 0) {
        bool timed_out = false;
        int status = reap(pid_, Clock::now() + std::chrono::milliseconds(500), timed_out);
        decode_status(status, exit_code_, term_signal_);
        pid_ = -1;
    }
    ProcessResult r;
    r.exit_code = exit_code_;
    r.term_signal = term_signal_;
    r.err = stderr_text();
    return r;
}

std::string WorkerProcess::stderr_text() const { return read_file(stderr_path_, 64 * 1024); }

} // namespace askit
