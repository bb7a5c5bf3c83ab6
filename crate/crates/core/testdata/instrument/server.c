#include "statefuzz_stt.h"

typedef enum {
    CONN_ACCEPTED,
    CONN_AUTHENTICATED,
    CONN_STREAMING,
    CONN_CLOSING = 9
} conn_state_t;

struct conn {
    conn_state_t state;
    int pending;
};

int conn_on_message(struct conn *c, int kind, conn_state_t requested)
{
    if (c->state == CONN_CLOSING)
        return -1;
    switch (kind) {
    case 0:
        c->state = CONN_AUTHENTICATED;
        break;
    case 1:
        if (c->state == CONN_AUTHENTICATED) {
            c->pending = 0;
            c->state = CONN_STREAMING;
        }
        break;
    case 2:
        c->state = requested;
        break;
    default:
        c->state = CONN_CLOSING;
        return -1;
    }
    return 0;
}

void conn_reset(struct conn *c)
{
    /* c->state = CONN_CLOSING; stays a comment */
    c->state
        = CONN_ACCEPTED;
    if (c->pending) c->state = CONN_CLOSING;
}

void conn_shutdown(struct conn *c, int graceful)
{
    if (graceful) {
        c->state = CONN_CLOSING;
    } else {
        c->pending = 0;
        c->state = CONN_ACCEPTED;
    }
}

int main(void)
{
    struct conn c = { CONN_ACCEPTED, 0 };
    conn_reset(&c);
    conn_on_message(&c, 0, CONN_ACCEPTED);
    conn_on_message(&c, 1, CONN_ACCEPTED);
    return c.state == CONN_STREAMING ? 0 : 1;
}
