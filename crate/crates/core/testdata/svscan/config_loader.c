typedef enum run_mode { RUN_MODE_FOREGROUND, RUN_MODE_DAEMON, RUN_MODE_MASTER } run_mode_t;
typedef enum { PRIORITY_LOW = -1, PRIORITY_NORMAL, PRIORITY_HIGH } priority_t;

struct config {
    run_mode_t run_mode;
    priority_t priority;
    int workers;
};

static struct config cfg;

void config_parse_arg(const char *arg)
{
    if (arg[1] == 'd')
        cfg.run_mode = RUN_MODE_DAEMON;
    if (arg[1] == 'm')
        cfg.run_mode = RUN_MODE_MASTER;
    if (arg[1] == 'p')
        cfg.priority = PRIORITY_HIGH;
    if (arg[1] == 'w')
        cfg.workers = 4;
}
