enum mqtt_conn_state {
    MQTT_DISCONNECTED,
    MQTT_CONNECTING,
    MQTT_CONNECTED,
    MQTT_DISCONNECTING
};

enum mqtt_qos { QOS_AT_MOST_ONCE, QOS_AT_LEAST_ONCE, QOS_EXACTLY_ONCE };

struct mqtt_client {
    enum mqtt_conn_state conn_state;
    enum mqtt_qos qos;
};

/* The QoS level is only ever read here; it comes from a packet field. */
int mqtt_publish_needs_ack(const struct mqtt_client *client)
{
    return client->qos != QOS_AT_MOST_ONCE;
}

void mqtt_on_event(struct mqtt_client *client, int event)
{
    if (event == 0)
        client->conn_state = MQTT_CONNECTING;
    else if (event == 1 && client->conn_state == MQTT_CONNECTING)
        client->conn_state = MQTT_CONNECTED;
    else if (event == 2)
        client->conn_state = MQTT_DISCONNECTING;
    else
        client->conn_state = MQTT_DISCONNECTED;
}
