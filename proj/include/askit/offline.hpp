#pragma once

namespace askit {

enum class NetworkDenial {
    /// socket(AF_INET/AF_INET6) fails with EACCES.
    Error,
    /// The whole process is killed on the first attempt.
    Kill,
};

/// Installs a seccomp filter on the calling thread's process image (and every
/// child it later spawns) that denies IPv4/IPv6 sockets. Unix sockets stay
/// available. Irreversible. Throws Error when seccomp is unavailable.
void forbid_network(NetworkDenial mode = NetworkDenial::Error);

} // namespace askit
