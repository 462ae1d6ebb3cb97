#include <stdio.h>

struct logger {
    const char *path;
    void (*emit)(void *sink, const char *msg);
};

void log_to_console(void *sink, const char *msg)
{
    fprintf(stderr, "log console: %s\n", msg);
}

void log_to_file(void *sink, const char *msg)
{
    fprintf((FILE *)sink, "log file: %s\n", msg);
}

void logger_attach(struct logger *lg, void (*emit)(void *, const char *))
{
    lg->emit = emit;
}

void log_message(struct logger *lg, const char *msg)
{
    lg->emit(lg, msg);
}
