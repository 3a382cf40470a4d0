import os
import sys


def _minrepair_main():
    mode, path, scratch = sys.argv[1], sys.argv[2], os.path.realpath(sys.argv[3])
    with open(path, "rb") as f:
        src = f.read()

    try:
        code = compile(src, "main.py", "exec", dont_inherit=True)
    except (SyntaxError, ValueError, OverflowError, RecursionError, MemoryError):
        if mode == "check":
            os._exit(3)
        os._exit(1)
    if mode == "check":
        os._exit(0)

    blocked = {
        "socket.__new__", "socket.connect", "socket.bind", "socket.sendto",
        "socket.sendmsg", "socket.getaddrinfo", "socket.gethostbyname",
        "subprocess.Popen", "os.system", "os.exec", "os.posix_spawn",
        "os.spawn", "os.fork", "os.forkpty", "os.kill", "os.killpg",
        "ctypes.dlopen", "ctypes.dlsym", "ctypes.cdata", "ctypes.addressof",
        "pty.spawn", "os.chdir", "os.setuid", "os.setgid",
    }
    path_events = {
        "os.remove", "os.rename", "os.rmdir", "os.mkdir", "os.chmod",
        "os.chown", "os.symlink", "os.link", "os.truncate", "os.utime",
        "os.listxattr", "os.setxattr", "os.removexattr", "shutil.rmtree",
        "shutil.copyfile", "shutil.copymode", "shutil.copystat", "shutil.move",
    }
    write_flags = os.O_WRONLY | os.O_RDWR | os.O_APPEND | os.O_CREAT | os.O_TRUNC
    realpath, join, fspath = os.path.realpath, os.path.join, os.fspath
    prefix = scratch + os.sep

    def inside(p):
        try:
            p = fspath(p)
        except TypeError:
            return True
        if isinstance(p, bytes):
            p = p.decode("utf-8", "surrogateescape")
        full = realpath(join(scratch, p))
        return full == scratch or full.startswith(prefix)

    def deny(event):
        raise PermissionError("sandbox: %s is not permitted" % event)

    def hook(event, args):
        if event in blocked:
            deny(event)
        if event == "open":
            target, mode_arg, flags = (tuple(args) + (None, None, None))[:3]
            if isinstance(target, int):
                return
            writing = isinstance(mode_arg, str) and any(c in mode_arg for c in "wax+")
            writing = writing or (isinstance(flags, int) and flags & write_flags)
            if writing and not inside(target):
                deny("writing outside the scratch directory")
        elif event in path_events:
            for a in args:
                if isinstance(a, (str, bytes, os.PathLike)) and not inside(a):
                    deny(event + " outside the scratch directory")

    sys.addaudithook(hook)
    sys.argv = ["main.py"]
    env = {"__name__": "__main__", "__file__": "main.py", "__builtins__": __builtins__}
    try:
        exec(code, env)
    except MemoryError:
        os._exit(86)


_minrepair_main()
