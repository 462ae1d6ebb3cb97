typedef void (*cleanup_fn)(void *);

void register_cleanup(cleanup_fn fn);

static void cleanup(void *p)
{
}

void b_init(void)
{
    register_cleanup(cleanup);
}
