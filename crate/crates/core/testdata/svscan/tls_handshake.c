enum hs_state {
    HS_CLIENT_HELLO,
    HS_SERVER_HELLO,
    HS_CERTIFICATE,
    HS_KEY_EXCHANGE,
    HS_FINISHED
};

enum alert_desc { ALERT_NONE, ALERT_DECODE_ERROR = 50, ALERT_HANDSHAKE_FAILURE = 40 };

struct tls_conn {
    enum hs_state hs;
    enum alert_desc alert;
};

static enum alert_desc check_record(int len)
{
    return len > 0 ? ALERT_NONE : ALERT_DECODE_ERROR;
}

int tls_step(struct tls_conn *s, int msg, int len)
{
    enum hs_state next;

    s->alert = check_record(len);
    if (s->alert != ALERT_NONE)
        return -1;
    next = s->hs;
    switch (msg) {
    case 1: next = HS_SERVER_HELLO; break;
    case 11: next = HS_CERTIFICATE; break;
    case 12: next = HS_KEY_EXCHANGE; break;
    case 20: next = HS_FINISHED; break;
    default:
        s->alert = ALERT_HANDSHAKE_FAILURE;
        return -1;
    }
    s->hs = next;
    if (s->hs == HS_FINISHED)
        s->hs = HS_CLIENT_HELLO;
    return 0;
}
