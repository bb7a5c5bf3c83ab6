/* RTSP session handling. */
typedef enum {
    RTSP_STATE_INIT,
    RTSP_STATE_READY,
    RTSP_STATE_PLAYING,
    RTSP_STATE_RECORDING
} RTSPState;

enum rtsp_transport { RTSP_TRANSPORT_UDP, RTSP_TRANSPORT_TCP, RTSP_TRANSPORT_HTTP };

typedef struct RTSPSession {
    RTSPState state;
    enum rtsp_transport transport;
    int bytes_read;
} RTSPSession;

void rtsp_setup(RTSPSession *rt, int interleaved)
{
    if (interleaved)
        rt->transport = RTSP_TRANSPORT_TCP;
    else
        rt->transport = RTSP_TRANSPORT_UDP;
    rt->state = RTSP_STATE_READY;
}

void rtsp_play(RTSPSession *rt)
{
    switch (rt->state) {
    case RTSP_STATE_READY:
        rt->state = RTSP_STATE_PLAYING;
        break;
    default:
        break;
    }
}

void rtsp_teardown(RTSPSession *rt)
{
    rt->bytes_read = 0;
    rt->state = RTSP_STATE_INIT;
}
