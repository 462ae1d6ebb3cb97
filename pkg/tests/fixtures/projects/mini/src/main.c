#include <stddef.h>

struct store;
struct logger;

struct command {
    const char *name;
    int (*run)(struct store *s, const char *arg);
};

int cmd_get(struct store *s, const char *arg)
{
    return arg != NULL;
}

int cmd_set(struct store *s, const char *arg)
{
    return s != NULL;
}

static struct command commands[] = {
    { "get", cmd_get },
    { "set", cmd_set },
};

int dispatch_command(struct store *s, int which, const char *arg)
{
    return commands[which].run(s, arg);
}

extern void logger_attach(struct logger *lg, void (*emit)(void *, const char *));
extern void log_to_console(void *sink, const char *msg);
extern void log_to_file(void *sink, const char *msg);
extern void store_set_order(struct store *s, int (*order)(const void *, const void *));
extern int cmp_keys(const void *a, const void *b);
extern int cmp_values(const void *a, const void *b);
extern void store_put(void *store, const char *value);
extern void store_for_each_key(struct store *s, void (*visit)(const char *key));
extern void print_key(const char *key);

void setup(struct store *s, struct logger *lg, int verbose)
{
    logger_attach(lg, verbose ? log_to_console : log_to_file);
    store_set_order(s, cmp_keys);
    store_for_each_key(s, print_key);
}

void *unused_hooks[] = { (void *)cmp_values, (void *)store_put };
