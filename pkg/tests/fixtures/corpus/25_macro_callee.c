#define CALL(f, x) f(x)
#define LOG(msg) log_impl(msg)

void log_impl(const char *m);

static void worker(int x) { }

void go(void)
{
    LOG("start");
    CALL(worker, 3);
    DO_SOMETHING(1, 2);
}
