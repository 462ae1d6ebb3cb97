typedef void (*log_fn)(const char *msg);

static void log_stderr(const char *msg) { }
static void log_syslog(const char *msg) { }

static log_fn active;

void configure(int use_syslog)
{
    active = use_syslog ? log_syslog : log_stderr;
}

void emit(const char *msg)
{
    if (active)
        active(msg);
}
